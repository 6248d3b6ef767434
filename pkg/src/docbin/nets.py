"""Generator and patch-critic topologies with deterministic initialization.

The generator is a compact U-Net: stride-2 conv encoder stages, a mirrored
decoder using nearest-neighbor upsampling plus conv, skip concatenation at
every stride boundary (including the raw input at full resolution), instance
normalization, and a sigmoid single-channel head. The critic is a patch-level
convolutional scorer producing an unbounded real-valued map with no
normalization on its first layer.

Parameters round-trip through ParamSet, a sectioned binary container with a
JSON header followed by little-endian float32 payloads.
"""

from __future__ import annotations

import hashlib
import json
import struct
from collections import OrderedDict
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from docbin.raster import RasterImage

_MAGIC = b"DBPS"


@dataclass(frozen=True)
class GeneratorSpec:
    in_channels: int = 1
    widths: tuple[int, ...] = (16, 32, 64, 128)
    norm: bool = True

    def __post_init__(self):
        if self.in_channels not in (1, 3):
            raise ValueError("in_channels must be 1 or 3")
        if len(self.widths) < 1 or any(w < 1 for w in self.widths):
            raise ValueError("widths must be a non-empty tuple of positive ints")


@dataclass(frozen=True)
class DiscriminatorSpec:
    cond_channels: int = 1
    widths: tuple[int, ...] = (32, 64, 128)
    norm: bool = True

    def __post_init__(self):
        if self.cond_channels not in (1, 3):
            raise ValueError("cond_channels must be 1 or 3")
        if len(self.widths) < 1 or any(w < 1 for w in self.widths):
            raise ValueError("widths must be a non-empty tuple of positive ints")


def spec_to_dict(spec: GeneratorSpec | DiscriminatorSpec) -> dict:
    d = asdict(spec)
    d["widths"] = list(d["widths"])
    d["kind"] = "generator" if isinstance(spec, GeneratorSpec) else "discriminator"
    return d


def spec_from_dict(d: dict) -> GeneratorSpec | DiscriminatorSpec:
    kind = d.get("kind")
    if kind == "generator":
        return GeneratorSpec(in_channels=d["in_channels"], widths=tuple(d["widths"]), norm=d["norm"])
    if kind == "discriminator":
        return DiscriminatorSpec(cond_channels=d["cond_channels"], widths=tuple(d["widths"]), norm=d["norm"])
    raise ValueError(f"unknown spec kind {kind!r}")


def spec_hash(spec: GeneratorSpec | DiscriminatorSpec) -> str:
    return hashlib.sha256(json.dumps(spec_to_dict(spec), sort_keys=True).encode()).hexdigest()


class Generator(nn.Module):
    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        widths = spec.widths
        self.down_factor = 2 ** len(widths)

        def block(cin, cout, kernel, stride, act):
            layers = [nn.Conv2d(cin, cout, kernel, stride, kernel // 2 - (1 if kernel == 4 else 0))]
            if spec.norm:
                layers.append(nn.InstanceNorm2d(cout, affine=True))
            layers.append(act)
            return nn.Sequential(*layers)

        self.encoder = nn.ModuleList()
        prev = spec.in_channels
        for w in widths:
            self.encoder.append(block(prev, w, 4, 2, nn.LeakyReLU(0.2)))
            prev = w

        # Decoder step i consumes the level-i feature map and the level-(i-1)
        # skip; the deepest skip channels are widths[-2]..widths[0], then the
        # raw input at full resolution.
        self.decoder = nn.ModuleList()
        skip_channels = [spec.in_channels] + list(widths[:-1])
        prev = widths[-1]
        for i in range(len(widths) - 1, -1, -1):
            out = widths[i - 1] if i >= 1 else widths[0]
            self.decoder.append(block(prev + skip_channels[i], out, 3, 1, nn.ReLU()))
            prev = out
        self.head = nn.Conv2d(prev, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.spec.in_channels:
            raise ValueError(f"expected {self.spec.in_channels} input channels, got {x.shape[1]}")
        h, w = x.shape[2], x.shape[3]
        f = self.down_factor
        pad_h = (f - h % f) % f
        pad_w = (f - w % f) % f
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate")
        skips = [x]
        cur = x
        for enc in self.encoder:
            cur = enc(cur)
            skips.append(cur)
        for i, dec in enumerate(self.decoder):
            cur = F.interpolate(cur, scale_factor=2, mode="nearest")
            cur = torch.cat([cur, skips[len(self.decoder) - 1 - i]], dim=1)
            cur = dec(cur)
        out = torch.sigmoid(self.head(cur))
        return out[:, :, :h, :w]


class PatchCritic(nn.Module):
    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        layers: list[nn.Module] = []
        prev = spec.cond_channels + 1
        for i, w in enumerate(spec.widths):
            layers.append(nn.Conv2d(prev, w, 4, 2, 1))
            if spec.norm and i > 0:
                layers.append(nn.InstanceNorm2d(w, affine=True))
            layers.append(nn.LeakyReLU(0.2))
            prev = w
        layers.append(nn.Conv2d(prev, 1, 4, 1, 1))
        self.net = nn.Sequential(*layers)

    def min_input_side(self) -> int:
        # The final stride-1 conv needs at least a 2x2 map after the downs.
        return 2 ** (len(self.spec.widths) + 1)

    def forward(self, candidate: torch.Tensor, condition: torch.Tensor) -> torch.Tensor:
        if candidate.shape[2:] != condition.shape[2:]:
            raise ValueError(f"candidate {tuple(candidate.shape[2:])} and condition {tuple(condition.shape[2:])} sizes differ")
        if condition.shape[1] != self.spec.cond_channels:
            raise ValueError(f"expected {self.spec.cond_channels} condition channels, got {condition.shape[1]}")
        if min(candidate.shape[2], candidate.shape[3]) < self.min_input_side():
            raise ValueError(f"critic needs inputs of at least {self.min_input_side()} px per side")
        return self.net(torch.cat([candidate, condition], dim=1))


def _init_module(module: nn.Module, seed: int) -> None:
    g = torch.Generator().manual_seed(seed)
    for name, p in module.named_parameters():
        with torch.no_grad():
            if name.endswith("weight") and p.dim() >= 2:
                p.normal_(0.0, 0.02, generator=g)
            elif "norm" in type(p).__name__.lower() or p.dim() == 1 and name.endswith("weight"):
                p.fill_(1.0)
            else:
                p.zero_()


@dataclass
class ParamSet:
    """Named float32 arrays plus the seed and spec they were built from."""

    tensors: "OrderedDict[str, np.ndarray]"
    seed: int
    spec: GeneratorSpec | DiscriminatorSpec

    @property
    def spec_hash(self) -> str:
        return spec_hash(self.spec)

    @classmethod
    def from_module(cls, module: nn.Module, seed: int, spec) -> "ParamSet":
        tensors = OrderedDict(
            (name, t.detach().cpu().numpy().astype(np.float32, copy=True))
            for name, t in module.state_dict().items()
        )
        return cls(tensors=tensors, seed=seed, spec=spec)

    def apply_to(self, module: nn.Module) -> None:
        state = module.state_dict()
        for name in state:
            if name not in self.tensors:
                raise ValueError(f"parameter {name!r} missing from ParamSet")
            state[name] = torch.from_numpy(self.tensors[name].copy())
        module.load_state_dict(state)

    def save(self, path: str | Path) -> None:
        names = list(self.tensors)
        header = {
            "version": 1,
            "seed": self.seed,
            "spec": spec_to_dict(self.spec),
            "spec_hash": self.spec_hash,
            "tensors": [{"name": n, "shape": list(self.tensors[n].shape)} for n in names],
        }
        blob = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for n in names:
                fh.write(np.ascontiguousarray(self.tensors[n], dtype="<f4").tobytes())

    @classmethod
    def load(cls, path: str | Path, expected_spec=None) -> "ParamSet":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MAGIC:
                raise ValueError(f"not a ParamSet file: {path}")
            (hlen,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(hlen).decode())
            spec = spec_from_dict(header["spec"])
            if spec_hash(spec) != header["spec_hash"]:
                raise ValueError(f"corrupt ParamSet: spec hash mismatch in {path}")
            if expected_spec is not None and spec_hash(expected_spec) != header["spec_hash"]:
                raise ValueError(
                    f"ParamSet spec hash {header['spec_hash'][:12]} does not match the requested spec"
                )
            tensors = OrderedDict()
            for entry in header["tensors"]:
                shape = tuple(entry["shape"])
                count = int(np.prod(shape)) if shape else 1
                buf = fh.read(4 * count)
                tensors[entry["name"]] = np.frombuffer(buf, dtype="<f4").reshape(shape).copy()
        return cls(tensors=tensors, seed=header["seed"], spec=spec)


def build_generator(spec: GeneratorSpec, seed: int) -> tuple[Generator, ParamSet]:
    """Construct and deterministically initialize a generator."""
    gen = Generator(spec)
    _init_module(gen, seed)
    return gen, ParamSet.from_module(gen, seed, spec)


def build_discriminator(spec: DiscriminatorSpec, seed: int) -> tuple[PatchCritic, ParamSet]:
    """Construct and deterministically initialize a patch critic."""
    disc = PatchCritic(spec)
    _init_module(disc, seed)
    return disc, ParamSet.from_module(disc, seed, spec)


def load_generator(path: str | Path, expected_spec: GeneratorSpec | None = None) -> Generator:
    ps = ParamSet.load(path, expected_spec)
    if not isinstance(ps.spec, GeneratorSpec):
        raise ValueError(f"{path} does not hold generator parameters")
    gen = Generator(ps.spec)
    ps.apply_to(gen)
    return gen


def load_discriminator(path: str | Path, expected_spec: DiscriminatorSpec | None = None) -> PatchCritic:
    ps = ParamSet.load(path, expected_spec)
    if not isinstance(ps.spec, DiscriminatorSpec):
        raise ValueError(f"{path} does not hold discriminator parameters")
    disc = PatchCritic(ps.spec)
    ps.apply_to(disc)
    return disc


_PROB_EPS = 1e-7


def image_to_tensor(img: RasterImage) -> torch.Tensor:
    """(1, C, H, W) float32 tensor from a raster image."""
    return torch.from_numpy(np.ascontiguousarray(img.data.transpose(2, 0, 1), dtype=np.float32)).unsqueeze(0)


def tensor_to_image(t: torch.Tensor) -> RasterImage:
    """Single (C, H, W) or (1, C, H, W) tensor back to a raster image."""
    arr = t.detach().cpu().numpy()
    if arr.ndim == 4:
        arr = arr[0]
    return RasterImage(np.clip(arr.transpose(1, 2, 0).astype(np.float64), 0.0, 1.0))


def forward_generator(gen: Generator, img: RasterImage) -> RasterImage:
    """Probability map in (0, 1) with the same spatial size as the input."""
    if img.channels != gen.spec.in_channels:
        raise ValueError(f"generator expects {gen.spec.in_channels} channels, got {img.channels}")
    with torch.no_grad():
        out = gen(image_to_tensor(img))
    arr = out[0, 0].numpy().astype(np.float64)
    return RasterImage(np.clip(arr, _PROB_EPS, 1.0 - _PROB_EPS)[:, :, np.newaxis])


def forward_discriminator(disc: PatchCritic, candidate: RasterImage, condition: RasterImage) -> np.ndarray:
    """Unbounded real-valued score map as a 2-D float64 array."""
    if candidate.channels != 1:
        raise ValueError("candidate must be single-channel")
    if (candidate.height, candidate.width) != (condition.height, condition.width):
        raise ValueError("candidate and condition sizes differ")
    with torch.no_grad():
        out = disc(image_to_tensor(candidate), image_to_tensor(condition))
    return out[0, 0].numpy().astype(np.float64)


def parameter_gradients(
    outputs: torch.Tensor, net: nn.Module, upstream: torch.Tensor | None = None
) -> "OrderedDict[str, np.ndarray]":
    """Gradients of `outputs` w.r.t. every parameter of `net`.

    `upstream` defaults to ones; a recorded forward pass is required.
    """
    if outputs.grad_fn is None:
        raise ValueError("no recorded forward pass: outputs carry no autograd graph")
    if upstream is None:
        upstream = torch.ones_like(outputs)
    names, params = zip(*net.named_parameters())
    grads = torch.autograd.grad(outputs, params, grad_outputs=upstream, retain_graph=True, allow_unused=True)
    return OrderedDict(
        (n, (g if g is not None else torch.zeros_like(p)).detach().cpu().numpy())
        for n, p, g in zip(names, params, grads)
    )


def input_gradients(
    outputs: torch.Tensor,
    wrt: torch.Tensor,
    upstream: torch.Tensor | None = None,
    create_graph: bool = False,
) -> torch.Tensor:
    """Gradient of `outputs` w.r.t. an input tensor (used by the gradient penalty)."""
    if outputs.grad_fn is None:
        raise ValueError("no recorded forward pass: outputs carry no autograd graph")
    if upstream is None:
        upstream = torch.ones_like(outputs)
    (grad,) = torch.autograd.grad(outputs, wrt, grad_outputs=upstream, create_graph=create_graph, retain_graph=True)
    return grad
