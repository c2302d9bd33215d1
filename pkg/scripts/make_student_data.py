#!/usr/bin/env python3
"""Generate the bundled student-performance CSV.

Produces a deterministic synthetic stand-in that matches the UCI
student-por.csv layout exactly (semicolon delimiter, quoted strings, same 33
columns, 649 rows, final grade G3 on a 0-20 scale with a centrally skewed
distribution). Feature marginals and correlations are modeled loosely on the
published dataset so that classifiers have real signal to learn; it is not
the original data. Anyone with the original UCI file can point the CLI at it
instead.

Run from the repo root:

    python scripts/make_student_data.py src/sedg/assets/student-por.csv
"""

from __future__ import annotations

import csv
import sys

import numpy as np

N_ROWS = 649
SEED = 20240649


def ordinal_from_latent(rng, latent, cuts, values):
    """Threshold latent + noise into ordinal categories."""
    noisy = latent + rng.normal(0.0, 1.0, size=latent.shape)
    out = np.full(latent.shape, values[0], dtype=object)
    for cut, val in zip(cuts, values[1:]):
        out[noisy > cut] = val
    return out


def categorical(rng, n, values, probs):
    return rng.choice(np.asarray(values, dtype=object), size=n, p=probs)


def make_rows(rng):
    n = N_ROWS
    ability = rng.normal(0.0, 1.0, size=n)
    support = rng.normal(0.0, 1.0, size=n)

    school = categorical(rng, n, ["GP", "MS"], [0.65, 0.35])
    sex = categorical(rng, n, ["F", "M"], [0.59, 0.41])
    age = ordinal_from_latent(
        rng, -0.4 * ability, [-1.2, -0.4, 0.3, 1.0, 1.6, 2.1, 2.5],
        [15, 16, 17, 18, 19, 20, 21, 22],
    )
    address = categorical(rng, n, ["U", "R"], [0.70, 0.30])
    famsize = categorical(rng, n, ["GT3", "LE3"], [0.70, 0.30])
    pstatus = categorical(rng, n, ["T", "A"], [0.88, 0.12])
    medu = ordinal_from_latent(rng, 0.8 * support, [-1.8, -0.6, 0.4, 1.3], [0, 1, 2, 3, 4])
    fedu = ordinal_from_latent(rng, 0.7 * support, [-1.7, -0.5, 0.5, 1.4], [0, 1, 2, 3, 4])
    mjob = categorical(rng, n, ["at_home", "health", "other", "services", "teacher"],
                       [0.21, 0.08, 0.40, 0.21, 0.10])
    fjob = categorical(rng, n, ["at_home", "health", "other", "services", "teacher"],
                       [0.06, 0.04, 0.57, 0.28, 0.05])
    reason = categorical(rng, n, ["course", "home", "other", "reputation"],
                         [0.44, 0.23, 0.11, 0.22])
    guardian = categorical(rng, n, ["father", "mother", "other"], [0.24, 0.70, 0.06])
    traveltime = ordinal_from_latent(rng, rng.normal(0, 0.5, n), [0.8, 1.8, 2.6], [1, 2, 3, 4])
    studytime = ordinal_from_latent(rng, 0.7 * ability, [-0.9, 0.6, 1.6], [1, 2, 3, 4])
    failures = ordinal_from_latent(rng, -1.1 * ability, [1.3, 2.1, 2.8], [0, 1, 2, 3])
    schoolsup = np.where(ability + rng.normal(0, 1, n) < -1.4, "yes", "no").astype(object)
    famsup = categorical(rng, n, ["yes", "no"], [0.61, 0.39])
    paid = categorical(rng, n, ["yes", "no"], [0.06, 0.94])
    activities = categorical(rng, n, ["yes", "no"], [0.49, 0.51])
    nursery = categorical(rng, n, ["yes", "no"], [0.80, 0.20])
    higher = np.where(0.9 * ability + rng.normal(0, 1, n) > -1.5, "yes", "no").astype(object)
    internet = categorical(rng, n, ["yes", "no"], [0.77, 0.23])
    romantic = categorical(rng, n, ["yes", "no"], [0.37, 0.63])
    famrel = ordinal_from_latent(rng, 0.3 * support, [-2.2, -1.4, -0.3, 1.2], [1, 2, 3, 4, 5])
    freetime = ordinal_from_latent(rng, rng.normal(0, 0.6, n), [-1.7, -0.6, 0.8, 1.8], [1, 2, 3, 4, 5])
    goout = ordinal_from_latent(rng, -0.3 * ability, [-1.6, -0.5, 0.8, 1.8], [1, 2, 3, 4, 5])
    dalc = ordinal_from_latent(rng, -0.5 * ability, [1.0, 1.9, 2.5, 3.0], [1, 2, 3, 4, 5])
    walc = ordinal_from_latent(rng, -0.4 * ability, [0.3, 1.1, 1.9, 2.6], [1, 2, 3, 4, 5])
    health = ordinal_from_latent(rng, rng.normal(0, 0.7, n), [-1.3, -0.5, 0.3, 1.0], [1, 2, 3, 4, 5])

    absences = np.minimum(rng.geometric(0.22, size=n) - 1 + np.where(ability < -1.0, rng.geometric(0.3, size=n), 0), 93)

    g3_raw = 11.4 + 2.9 * ability + rng.normal(0.0, 1.1, size=n)
    g3 = np.clip(np.rint(g3_raw), 0, 20).astype(int)
    dropouts = rng.random(n) < 0.022
    g3[dropouts] = 0
    g1 = np.clip(g3 + np.rint(rng.normal(0.1, 1.3, size=n)).astype(int), 0, 20)
    g2 = np.clip(g3 + np.rint(rng.normal(0.0, 0.9, size=n)).astype(int), 0, 20)
    # the real data shows G3=0 students with nonzero partial grades
    g1[dropouts] = np.clip(np.rint(8 + 2 * rng.normal(size=dropouts.sum())), 4, 12).astype(int)
    g2[dropouts] = np.clip(g1[dropouts] + rng.integers(-2, 1, size=dropouts.sum()), 0, 20)

    cols = [
        ("school", school), ("sex", sex), ("age", age), ("address", address),
        ("famsize", famsize), ("Pstatus", pstatus), ("Medu", medu), ("Fedu", fedu),
        ("Mjob", mjob), ("Fjob", fjob), ("reason", reason), ("guardian", guardian),
        ("traveltime", traveltime), ("studytime", studytime), ("failures", failures),
        ("schoolsup", schoolsup), ("famsup", famsup), ("paid", paid),
        ("activities", activities), ("nursery", nursery), ("higher", higher),
        ("internet", internet), ("romantic", romantic), ("famrel", famrel),
        ("freetime", freetime), ("goout", goout), ("Dalc", dalc), ("Walc", walc),
        ("health", health), ("absences", absences), ("G1", g1), ("G2", g2), ("G3", g3),
    ]
    return cols


def main(out_path: str) -> None:
    rng = np.random.default_rng(SEED)
    cols = make_rows(rng)
    header = [name for name, _ in cols]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=";", quoting=csv.QUOTE_NONNUMERIC)
        writer.writerow(header)
        for i in range(N_ROWS):
            writer.writerow([int(col[i]) if isinstance(col[i], (np.integer, int)) else col[i]
                             for _, col in cols])
    counts = np.bincount([int(c[1][i]) for c in cols if c[0] == "G3" for i in range(N_ROWS)], minlength=21)
    print(f"wrote {out_path}: {N_ROWS} rows")
    print("G3 distribution:", dict(enumerate(counts.tolist())))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/sedg/assets/student-por.csv")
