"""cpscodec: a padding-free, block-wise neural image codec whose tiled
encode/decode is bit-exactly equivalent to whole-image processing."""

from . import (accel, bench, blocks, calculus, codec, entropy, metrics,
               ops, ppm, tiling)
from .blocks import (NetworkSpec, WeightStore, build_even_network,
                     build_canonical_network, forward, init_weights,
                     load_weights, save_weights)
from .calculus import (LayerSpec, footprint, out_size, overlap,
                       receptive_field, scale_factor, unreachable,
                       valid_feature_count)
from .codec import (Bitstream, CodecResult, decode_full, decode_tiled,
                    encode_full, encode_tiled)
from .errors import (CodecError, ContractViolation, CoverageError,
                     DecodeError, FormatError, PlanError, SizingError,
                     VerifyMismatch)
from .ops import activation, add, concat_channels, conv2d, crop2d, stitch2d, tconv2d
from .tiling import DecodePlan, TilePlan, plan_decode, plan_encode, verify_plan
from .tensor import AllocStats, Tensor, alloc_stats, reset_peak

__version__ = "0.1.0"
