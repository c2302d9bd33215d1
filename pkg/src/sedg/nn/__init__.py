from .core import (
    BatchNorm,
    Dense,
    DivergenceError,
    Dropout,
    FeatureEmbedder,
    Param,
    Relu,
    Sequential,
    cross_entropy,
    softmax,
    softmax_cross_entropy,
)
from .gradcheck import gradient_check
from .models import (
    Autoencoder,
    LrndBlockConfig,
    NNModel,
    NnModelConfig,
    ReconHead,
    TrainConfig,
    Vae,
    gaussian_kl,
    load_checkpoint,
    save_checkpoint,
    train_autoencoder,
    train_classifier,
    train_vae,
)
from .optim import Adam, PlateauScheduler
