"""Model builders: 1-D conv front-end, MobileNetV2 front-end, task heads.

Two front-end families share one four-head back-end (type softmax plus
three scalar regressors). The 1-D variant reads F0 trajectories; the 2-D
variant reads 224x224x3 feature images in [-1, 1] straight from PFT1
exports, so no resizing happens here.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import torch
from torch import nn

__all__ = [
    "F0_INPUT_KINDS",
    "IMAGE_INPUT_KINDS",
    "VARIANTS",
    "HEAD_NAMES",
    "PT1D_FILTERS",
    "PT1D_KERNEL",
    "PT1D_STRIDE",
    "PT1D_POOL_STEPS",
    "MOBILENET_WEIGHTS_ENV",
    "ModelSpec",
    "receptive_field",
    "build_pt1d_frontend",
    "build_vi2d_frontend",
    "build_model",
    "build_finetune",
    "MultiHeadNet",
    "FineTuneNet",
    "count_parameters",
]

F0_INPUT_KINDS = ("swipe_f0", "oracle_f0")
IMAGE_INPUT_KINDS = ("stft", "mel", "cqt", "pitch")
VARIANTS = ("PT1D", "VI2D_I", "VI2D_R", "VI2D_S")
HEAD_NAMES = ("type", "f_b_cent", "delta_f", "f_m")

PT1D_FILTERS = (512, 256, 128, 64)
PT1D_KERNEL = 16
PT1D_STRIDE = 4
# Valid convolution on an input exactly one receptive field long (5101
# frames) leaves 15 time steps; adaptive pooling to that count keeps the
# head geometry independent of the runtime sequence length.
PT1D_POOL_STEPS = 15

MOBILENET_WEIGHTS_ENV = "SPCHARNESS_MOBILENET_WEIGHTS"
_MOBILENET_FILE = "mobilenet_v2-b0353104.pth"


@dataclass(frozen=True)
class ModelSpec:
    """Architecture selection: front-end variant, input kind, head sizes."""

    variant: str
    input_kind: str
    head_trunk: int = 256
    head_tap: int = 64
    dropout: float = 0.2
    num_types: int = 7

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.input_kind not in F0_INPUT_KINDS + IMAGE_INPUT_KINDS:
            raise ValueError(f"unknown input kind: {self.input_kind!r}")
        if self.variant == "PT1D" and self.input_kind not in F0_INPUT_KINDS:
            raise ValueError("PT1D takes F0 inputs only")
        if self.variant != "PT1D" and self.input_kind not in IMAGE_INPUT_KINDS:
            raise ValueError(f"{self.variant} takes image inputs only")
        if self.head_trunk < 1 or self.head_tap < 1:
            raise ValueError("head widths must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.num_types < 2:
            raise ValueError("num_types must be >= 2")

    @property
    def wants_images(self) -> bool:
        return self.input_kind in IMAGE_INPUT_KINDS


def receptive_field(layers) -> int:
    """Receptive field of a strided conv stack, in input samples.

    ``layers`` is a sequence of (kernel, stride) pairs. The step between
    neighbouring taps of layer i is the product of strides up to and
    including layer i, so each layer adds (kernel - 1) of those steps;
    the four-layer front-end here comes out at 5101.
    """
    rf, jump = 1, 1
    for kernel, stride in layers:
        if kernel < 1 or stride < 1:
            raise ValueError("kernel and stride must be >= 1")
        jump *= stride
        rf += (kernel - 1) * jump
    return rf


class PT1DFrontend(nn.Module):
    """Four strided 1-D conv layers over an F0 sequence.

    Input (B, 1, L) for any L >= 1; output a flat (B, 64 * 15) embedding.
    Padding of kernel // 2 keeps layer inputs defined down to very short
    patches; the adaptive pool fixes the flattened width.
    """

    def __init__(self):
        super().__init__()
        layers, in_ch = [], 1
        for out_ch in PT1D_FILTERS:
            layers.append(nn.Conv1d(in_ch, out_ch, PT1D_KERNEL,
                                    stride=PT1D_STRIDE,
                                    padding=PT1D_KERNEL // 2))
            layers.append(nn.ReLU())
            in_ch = out_ch
        self.convs = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool1d(PT1D_POOL_STEPS)
        self.embedding_dim = PT1D_FILTERS[-1] * PT1D_POOL_STEPS

    def forward(self, x):
        return self.pool(self.convs(x)).flatten(1)


class VI2DFrontend(nn.Module):
    """MobileNetV2 feature extractor without its classifier.

    Input (B, 3, 224, 224) in [-1, 1]; output the pooled 1280-dim
    penultimate feature vector.
    """

    def __init__(self, init: str, weights_path=None):
        super().__init__()
        if init not in ("imagenet", "random"):
            raise ValueError("init must be 'imagenet' or 'random'")
        from torchvision.models import mobilenet_v2

        net = mobilenet_v2(weights=None)
        if init == "imagenet":
            net.load_state_dict(_imagenet_state_dict(weights_path))
        self.features = net.features
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.embedding_dim = net.last_channel

    def forward(self, x):
        return self.pool(self.features(x)).flatten(1)


def _imagenet_state_dict(weights_path=None):
    """Locate and load the MobileNetV2 ImageNet checkpoint.

    Resolution order: explicit path, the environment variable, then the
    torch hub checkpoint cache. A missing file is a hard error; falling
    back to random weights silently would corrupt any init comparison.
    """
    path = weights_path or os.environ.get(MOBILENET_WEIGHTS_ENV)
    if path is None:
        path = os.path.join(torch.hub.get_dir(), "checkpoints",
                            _MOBILENET_FILE)
    if not os.path.isfile(path):
        raise RuntimeError(
            f"MobileNetV2 ImageNet weights not found at {path}; place "
            f"{_MOBILENET_FILE} there or set {MOBILENET_WEIGHTS_ENV}. "
            "Pass init='random' to request random initialization "
            "explicitly.")
    return torch.load(path, map_location="cpu", weights_only=True)


def build_pt1d_frontend() -> PT1DFrontend:
    return PT1DFrontend()


def build_vi2d_frontend(init: str, weights_path=None) -> VI2DFrontend:
    return VI2DFrontend(init, weights_path)


class HeadBlock(nn.Module):
    """Dense block: trunk -> dropout -> tap embedding -> output layer."""

    def __init__(self, in_dim, trunk, tap, dropout, out_dim):
        super().__init__()
        self.block = nn.Sequential(
            nn.Linear(in_dim, trunk), nn.ReLU(), nn.Dropout(dropout),
            nn.Linear(trunk, tap), nn.ReLU())
        self.out = nn.Linear(tap, out_dim)

    def forward(self, x):
        emb = self.block(x)
        return emb, self.out(emb)


class MultiHeadNet(nn.Module):
    """Front-end plus four heads: type logits and three regressors.

    ``forward`` returns a dict with ``type_logits`` (B, num_types),
    ``reg`` (B, 3) ordered (f_b_cent, delta_f, f_m), and ``embedding``
    (B, 4 * tap), the concatenation of all head tap activations used for
    fine-tuning.
    """

    def __init__(self, spec: ModelSpec, frontend: nn.Module):
        super().__init__()
        self.spec = spec
        self.frontend = frontend
        in_dim = frontend.embedding_dim
        heads = {}
        for name in HEAD_NAMES:
            out_dim = spec.num_types if name == "type" else 1
            # "type" would shadow nn.Module.type as a ModuleDict key
            heads[f"{name}_head"] = HeadBlock(in_dim, spec.head_trunk,
                                              spec.head_tap, spec.dropout,
                                              out_dim)
        self.heads = nn.ModuleDict(heads)
        self.embedding_dim = spec.head_tap * len(HEAD_NAMES)

    def forward(self, x):
        z = self.frontend(x)
        embs, outs = {}, {}
        for name in HEAD_NAMES:
            embs[name], outs[name] = self.heads[f"{name}_head"](z)
        reg = torch.cat([outs[n] for n in HEAD_NAMES[1:]], dim=1)
        embedding = torch.cat([embs[n] for n in HEAD_NAMES], dim=1)
        return {"type_logits": outs["type"], "reg": reg,
                "embedding": embedding}


class FineTuneNet(nn.Module):
    """A pre-trained MultiHeadNet with one task softmax on top.

    The new layer reads the concatenated head embeddings; every
    parameter, including the front-end, stays trainable.
    """

    def __init__(self, base: MultiHeadNet, num_classes: int):
        super().__init__()
        if num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        self.base = base
        self.task_out = nn.Linear(base.embedding_dim, num_classes)

    def forward(self, x):
        return self.task_out(self.base(x)["embedding"])


def build_model(spec: ModelSpec, weights_path=None) -> MultiHeadNet:
    """Instantiate the network described by ``spec``.

    VI2D_I and VI2D_S require the ImageNet checkpoint (see
    ``MOBILENET_WEIGHTS_ENV``); VI2D_R initializes randomly.
    """
    if spec.variant == "PT1D":
        frontend = build_pt1d_frontend()
    elif spec.variant == "VI2D_R":
        frontend = build_vi2d_frontend("random")
    else:
        frontend = build_vi2d_frontend("imagenet", weights_path)
    return MultiHeadNet(spec, frontend)


def build_finetune(base: MultiHeadNet, num_classes: int) -> FineTuneNet:
    return FineTuneNet(base, num_classes)


def count_parameters(model: nn.Module) -> int:
    """Trainable parameter count."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)
