from .unet import UNetConfig, UNetModel, ConvSpec, conv_layout, parameter_count, build_unet

__all__ = ["UNetConfig", "UNetModel", "ConvSpec", "conv_layout", "parameter_count", "build_unet"]
