from .models import (
    Image,
    ComplexField,
    ChannelKind,
    FreeParams,
    DiffuserParams,
    MMFParams,
    ChannelConfig,
    GlyphSpec,
    DIGITS,
    LETTERS,
    UINT64_MAX,
    DEFAULT_WAVELENGTH,
)
from .image_ops import as_image, normalize, resize_bilinear, block_average
from .propagation import (
    propagate_angular_spectrum,
    correlated_gaussian_field,
    make_phase_screen,
    wrap_phase,
)
from .channels import (
    free_channel,
    diffuser_channel,
    mmf_channel,
    apply_channel,
    transmission_matrix,
)
from .glyphs import render_glyph, SUPPORTED_SYMBOLS

__all__ = [
    "Image",
    "ComplexField",
    "ChannelKind",
    "FreeParams",
    "DiffuserParams",
    "MMFParams",
    "ChannelConfig",
    "GlyphSpec",
    "DIGITS",
    "LETTERS",
    "UINT64_MAX",
    "DEFAULT_WAVELENGTH",
    "as_image",
    "normalize",
    "resize_bilinear",
    "block_average",
    "propagate_angular_spectrum",
    "correlated_gaussian_field",
    "make_phase_screen",
    "wrap_phase",
    "free_channel",
    "diffuser_channel",
    "mmf_channel",
    "apply_channel",
    "transmission_matrix",
    "render_glyph",
    "SUPPORTED_SYMBOLS",
]
