"""Neural chroma intra prediction with spatial information refinement.

Library layout:

- :mod:`chromapred.media` -- image decoding, BT.601 conversion, YUV files
- :mod:`chromapred.blocks` -- boundaries, location maps, block extraction
- :mod:`chromapred.dataset` -- binary dataset container
- :mod:`chromapred.ops` / :mod:`chromapred.optim` -- tensor ops and Adam
- :mod:`chromapred.gradcheck` -- finite-difference gradient verification
- :mod:`chromapred.model` -- the three network variants
- :mod:`chromapred.cclm` -- linear-model baseline predictor
- :mod:`chromapred.training` / :mod:`chromapred.evaluation` -- harness
- :mod:`chromapred.cli` -- the ``chromapred`` command
"""

from .blocks import (BlockSample, BoundaryArray, LocationMaps,
                     assemble_baseline, assemble_inputs, assemble_scheme_a,
                     assemble_scheme_b, build_boundary, build_location_maps,
                     extract_block, extract_samples, pool_luma_boundary)
from .cclm import LinearModel, derive_lm, predict_lm
from .dataset import read_dataset, read_dataset_header, write_dataset
from .evaluation import EvalReport, compare, evaluate
from .media import (Frame, RgbImage, decode_image, read_yuv, rgb_to_yuv444,
                    subsample_420, write_yuv)
from .model import (ModelConfig, forward, init_params, load_checkpoint,
                    loss_and_grads, save_checkpoint)
from .training import TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "BlockSample", "BoundaryArray", "EvalReport", "Frame", "LinearModel",
    "LocationMaps", "ModelConfig", "RgbImage", "TrainConfig", "TrainResult",
    "assemble_baseline", "assemble_inputs", "assemble_scheme_a",
    "assemble_scheme_b", "build_boundary", "build_location_maps", "compare",
    "decode_image", "derive_lm", "evaluate", "extract_block",
    "extract_samples", "forward", "init_params", "load_checkpoint",
    "loss_and_grads", "pool_luma_boundary", "predict_lm", "read_dataset",
    "read_dataset_header", "read_yuv", "rgb_to_yuv444", "save_checkpoint",
    "subsample_420", "train", "write_dataset", "write_yuv",
]
