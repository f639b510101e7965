from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (BatchNorm2d, BilinearUpsample2, Conv2d, ConvBlock,
                     MaxPool2, Parameter, ReLU, SEBlock)
from .model import NormalizationSpec, UNet, UNetConfig, infer
from .train import Adam, LossLog, TrainingSchedule, l2_loss, train

__all__ = [
    "Adam", "BatchNorm2d", "BilinearUpsample2", "Conv2d", "ConvBlock",
    "LossLog", "MaxPool2", "NormalizationSpec", "Parameter", "ReLU",
    "SEBlock", "TrainingSchedule", "UNet", "UNetConfig", "infer",
    "l2_loss", "load_checkpoint", "save_checkpoint", "train",
]
