"""Training harness for exported synthetic pitch contour datasets.

Consumes only the exporter's file formats: dataset manifests (JSON), F0
contour CSVs, PFT1 tensors, and labeled patch indexes (CSV). Audio is
never read here; anything that needs a waveform happens upstream.
"""

from spcharness.conformance import (confidence_aggregate, multitask_loss_torch,
                                    multitask_loss)
from spcharness.data import read_export_index, read_f0_csv, read_manifest, read_pft1
from spcharness.models import ModelSpec, build_model, receptive_field
from spcharness.training import (TrainSchedule, finetune_single_task,
                                 pretrain_multitask)

__all__ = [
    "ModelSpec",
    "TrainSchedule",
    "build_model",
    "confidence_aggregate",
    "multitask_loss_torch",
    "finetune_single_task",
    "multitask_loss",
    "pretrain_multitask",
    "read_export_index",
    "read_f0_csv",
    "read_manifest",
    "read_pft1",
    "receptive_field",
]

__version__ = "0.1.0"
