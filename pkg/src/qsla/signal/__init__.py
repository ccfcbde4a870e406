from .channel import ChannelConfig, apply_offsets, awgn_channel
from .dataset import (
    SignalDataset,
    Split,
    generate_dataset,
    generate_frame,
    split_counts,
    split_dataset,
    stratified_split_from_cells,
)
from .frames import (
    FRAME_LEN,
    NUM_CLASSES,
    SNR_GRID,
    IQFrame,
    QuadView,
    quad_preprocess,
    quad_views_batch,
)
from .modulators import (
    CLASS_NAMES,
    SCHEMES,
    ModulationScheme,
    audio_source,
    frame_source,
    get_scheme,
    modulate,
)
from .sigio import read_dataset, write_dataset

__all__ = [
    "ChannelConfig", "apply_offsets", "awgn_channel",
    "SignalDataset", "Split", "generate_dataset", "generate_frame",
    "split_counts", "split_dataset", "stratified_split_from_cells",
    "FRAME_LEN", "NUM_CLASSES", "SNR_GRID", "IQFrame", "QuadView",
    "quad_preprocess", "quad_views_batch",
    "CLASS_NAMES", "SCHEMES", "ModulationScheme", "audio_source",
    "frame_source", "get_scheme", "modulate",
    "read_dataset", "write_dataset",
]
