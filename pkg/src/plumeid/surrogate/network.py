"""Dense-block convolutional encoder-decoder mapping the initial plume map to
the stacked concentration snapshots.

The network follows a coarse-refine layout: an initial strided convolution,
a dense block, an encoding transition that halves both spatial extent and
feature count, a bottleneck dense block, then decoding transitions (nearest
neighbor upsampling plus convolution) interleaved with the final dense block,
and a closing 1x1 convolution to one output channel per observation time.
Every layer is pre-activated (norm - ReLU - conv). Odd input sizes are
handled by recording the encoder shapes and upsampling back to them exactly.

Concentrations are divided by ``INPUT_SCALE`` before entering the network and
multiplied back on the way out, keeping activations O(1).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

#: Maximum prior plume strength; normalizes concentrations to O(1).
INPUT_SCALE = 100.0

CHECKPOINT_MAGIC = "plume-surrogate-checkpoint"


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyperparameters.

    The default matches the full-scale study network (dense blocks of
    6/12/6 layers, growth 40, 64 initial features); :func:`desk_config`
    returns the reduced preset used by the desk-scale experiments.
    """

    block_layers: tuple[int, int, int] = (6, 12, 6)
    growth_rate: int = 40
    initial_features: int = 64
    kernel_size: int = 3
    in_channels: int = 1
    out_channels: int = 16

    def __post_init__(self):
        if len(self.block_layers) != 3:
            raise ValueError("the architecture uses exactly three dense blocks")
        if any(n < 1 for n in self.block_layers):
            raise ValueError("dense blocks need at least one internal layer")
        if self.growth_rate < 1 or self.initial_features < 1:
            raise ValueError("growth rate and initial features must be positive")
        if self.out_channels < 1 or self.in_channels < 1:
            raise ValueError("channel counts must be positive")

    def to_dict(self) -> dict:
        return {
            "block_layers": list(self.block_layers),
            "growth_rate": self.growth_rate,
            "initial_features": self.initial_features,
            "kernel_size": self.kernel_size,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        return cls(
            block_layers=tuple(data["block_layers"]),
            growth_rate=int(data["growth_rate"]),
            initial_features=int(data["initial_features"]),
            kernel_size=int(data["kernel_size"]),
            in_channels=int(data["in_channels"]),
            out_channels=int(data["out_channels"]),
        )


def desk_config(out_channels: int = 16) -> NetworkConfig:
    """Reduced architecture for desk-scale runs: blocks 3/6/3, growth 16."""
    return NetworkConfig(block_layers=(3, 6, 3), growth_rate=16,
                         initial_features=32, out_channels=out_channels)


class _DenseLayer(nn.Module):
    def __init__(self, in_features: int, growth: int, kernel: int):
        super().__init__()
        self.norm = nn.BatchNorm2d(in_features)
        self.conv = nn.Conv2d(in_features, growth, kernel, padding=kernel // 2, bias=False)

    def forward(self, x):
        return torch.cat([x, self.conv(F.relu(self.norm(x)))], dim=1)


class _DenseBlock(nn.Sequential):
    def __init__(self, in_features: int, n_layers: int, growth: int, kernel: int):
        layers = [_DenseLayer(in_features + k * growth, growth, kernel)
                  for k in range(n_layers)]
        super().__init__(*layers)
        self.out_features = in_features + n_layers * growth
        # dense connectivity bookkeeping: the last concat must line up
        assert layers[-1].conv.in_channels + growth == self.out_features


class _EncodeTransition(nn.Module):
    """Halve feature count (1x1 conv) then halve spatial dims (strided 3x3)."""

    def __init__(self, in_features: int):
        super().__init__()
        out = in_features // 2
        self.norm1 = nn.BatchNorm2d(in_features)
        self.squeeze = nn.Conv2d(in_features, out, 1, bias=False)
        self.norm2 = nn.BatchNorm2d(out)
        self.down = nn.Conv2d(out, out, 3, stride=2, padding=1, bias=False)
        self.out_features = out

    def forward(self, x):
        x = self.squeeze(F.relu(self.norm1(x)))
        return self.down(F.relu(self.norm2(x)))


class _DecodeTransition(nn.Module):
    """Nearest-neighbor upsample to a recorded shape, then a 3x3 convolution."""

    def __init__(self, in_features: int):
        super().__init__()
        out = in_features // 2
        self.norm = nn.BatchNorm2d(in_features)
        self.conv = nn.Conv2d(in_features, out, 3, padding=1, bias=False)
        self.out_features = out

    def forward(self, x, size):
        x = F.interpolate(x, size=size, mode="nearest")
        return self.conv(F.relu(self.norm(x)))


class DenseEncoderDecoder(nn.Module):
    """The raw torch module; operates on normalized tensors (B, 1, H, W)."""

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        k = config.kernel_size
        growth = config.growth_rate
        l1, l2, l3 = config.block_layers

        self.stem = nn.Conv2d(config.in_channels, config.initial_features, 7,
                              stride=2, padding=3, bias=False)
        features = config.initial_features
        self.block1 = _DenseBlock(features, l1, growth, k)
        self.enc = _EncodeTransition(self.block1.out_features)
        self.block2 = _DenseBlock(self.enc.out_features, l2, growth, k)
        self.dec1 = _DecodeTransition(self.block2.out_features)
        self.block3 = _DenseBlock(self.dec1.out_features, l3, growth, k)
        self.dec2 = _DecodeTransition(self.block3.out_features)
        self.final_norm = nn.BatchNorm2d(self.dec2.out_features)
        self.head = nn.Conv2d(self.dec2.out_features, config.out_channels, 1, bias=True)

    def forward(self, x):
        full_size = x.shape[-2:]
        x = self.stem(x)
        half_size = x.shape[-2:]
        x = self.block1(x)
        x = self.enc(x)
        x = self.block2(x)
        x = self.dec1(x, size=half_size)
        x = self.block3(x)
        x = self.dec2(x, size=full_size)
        return self.head(F.relu(self.final_norm(x)))


@dataclass
class SurrogateNetwork:
    """A trained (or trainable) surrogate: torch module plus metadata."""

    config: NetworkConfig
    module: DenseEncoderDecoder
    epochs_run: int = 0
    test_rmse: float | None = None

    def n_parameters(self) -> int:
        return sum(p.numel() for p in self.module.parameters())

    def predict(self, c_in: np.ndarray) -> np.ndarray:
        """Map one initial-concentration array (n2, n1) to the stacked
        snapshot maps (out_channels, n2, n1), in physical units, float64,
        clamped at zero from below."""
        c_in = np.asarray(c_in, dtype=np.float32)
        if c_in.ndim != 2:
            raise ValueError(f"expected a 2-D concentration map, got shape {c_in.shape}")
        self.module.eval()
        with torch.no_grad():
            x = torch.from_numpy(c_in / INPUT_SCALE)[None, None]
            out = self.module(x)[0].double().numpy()
        return np.maximum(out * INPUT_SCALE, 0.0)

    def predict_batch(self, c_in: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`predict` over a stack of maps (B, n2, n1)."""
        c_in = np.asarray(c_in, dtype=np.float32)
        self.module.eval()
        with torch.no_grad():
            x = torch.from_numpy(c_in / INPUT_SCALE)[:, None]
            out = self.module(x).double().numpy()
        return np.maximum(out * INPUT_SCALE, 0.0)


def forward_pass(net: SurrogateNetwork, c_in: np.ndarray) -> np.ndarray:
    """Inference-mode evaluation of the surrogate on one concentration map."""
    return net.predict(c_in)


def build_network(config: NetworkConfig, seed: int = 0) -> SurrogateNetwork:
    """Construct a freshly initialized surrogate, deterministic given the seed.

    Verifies the round-trip shape contract for the production map size and
    for a deliberately odd size before returning.
    """
    torch.manual_seed(seed)
    module = DenseEncoderDecoder(config)
    net = SurrogateNetwork(config, module)
    for shape in ((41, 81), (23, 37)):
        probe = torch.zeros(1, config.in_channels, *shape)
        module.eval()
        with torch.no_grad():
            out = module(probe)
        if out.shape != (1, config.out_channels, *shape):
            raise AssertionError(
                f"decoder failed to restore input shape {shape}: got {tuple(out.shape)}")
    return net


def save_checkpoint(net: SurrogateNetwork, path: str | Path) -> None:
    """Checkpoint layout: one JSON header line, then the raw little-endian
    float32 parameter payload in state-dict declaration order."""
    state = net.module.state_dict()
    entries = []
    payload = io.BytesIO()
    for name, tensor in state.items():
        array = tensor.detach().cpu().numpy()
        entries.append({
            "name": name,
            "shape": list(array.shape),
            "dtype": str(array.dtype),
        })
        payload.write(np.ascontiguousarray(array, dtype="<f4").tobytes())
    header = {
        "format": CHECKPOINT_MAGIC,
        "config": net.config.to_dict(),
        "entries": entries,
        "metadata": {"epochs_run": net.epochs_run, "test_rmse": net.test_rmse},
    }
    with Path(path).open("wb") as fh:
        fh.write(json.dumps(header).encode())
        fh.write(b"\n")
        fh.write(payload.getvalue())


def load_checkpoint(path: str | Path) -> SurrogateNetwork:
    path = Path(path)
    with path.open("rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a surrogate checkpoint")
        raw = fh.read()
    config = NetworkConfig.from_dict(header["config"])
    module = DenseEncoderDecoder(config)
    state = {}
    offset = 0
    for entry in header["entries"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        chunk = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        array = chunk.reshape(entry["shape"]).astype(entry["dtype"])
        state[entry["name"]] = torch.from_numpy(array.copy())
    module.load_state_dict(state)
    meta = header.get("metadata", {})
    return SurrogateNetwork(config, module,
                            epochs_run=int(meta.get("epochs_run", 0)),
                            test_rmse=meta.get("test_rmse"))
