"""The three networks: an action-conditioned next-frame generator, a
conditional real/generated discriminator, and a siamese key-press
classifier. All convolutional geometry is fixed at 64x64 grayscale.

The generator and discriminator are all-convolutional (no dense layers
anywhere); the classifier is five shared-trunk convolutions followed by a
three-layer dense head and a readout. An optional shared trunk ties one
three-layer convolution stack across all three networks.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from dreamdrive.errors import CheckpointError, DimensionError
from dreamdrive.numerics.layers import (
    BatchNorm2d,
    ChannelPad,
    Conv2d,
    ConvTranspose2d,
    Dense,
    Dropout,
    Flatten,
    Layer,
    LeakyReLU,
    MaxPool2d,
    ReLU,
    Sequential,
    Sigmoid,
    Tanh,
)
from dreamdrive.numerics.tensor import Hyperparams
from dreamdrive.rng import Prng, derive_seed

FRAME_SIZE = 64
TRUNK_CHANNELS = 5  # widest input any of the three networks feeds the shared trunk

CKPT_MAGIC = b"SADW"
CKPT_VERSION = 1


def frames_to_unit(frames: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Byte frames [N,H,W] or [H,W] to [N,1,H,W] floats in [-1, 1]."""
    arr = np.asarray(frames)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise DimensionError(f"expected [H,W] or [N,H,W] frames, got rank {arr.ndim}")
    return (arr.astype(dtype) / 127.5 - 1.0)[:, None]


def unit_to_frames(x: np.ndarray) -> np.ndarray:
    """[-1, 1] tensors [N,1,H,W] back to byte frames [N,H,W]."""
    return np.clip((np.asarray(x)[:, 0] + 1.0) * 127.5, 0, 255).round().astype(np.uint8)


def action_channels(actions, h: int, w: int, dtype=np.float32) -> np.ndarray:
    """Constant one-hot planes, one per action class."""
    actions = np.asarray(actions)
    n = actions.shape[0]
    out = np.zeros((n, 3, h, w), dtype=dtype)
    out[np.arange(n), actions] = 1.0
    return out


class SharedTrunk:
    """One three-layer convolution stack reused by all three networks when
    the shared-trunk flag is on. Inputs are zero-padded to a common channel
    count, so the parameter set is literally one object."""

    def __init__(self, rng: Prng, hp: Hyperparams, dtype=np.float32):
        self.out_channels = 64
        self.out_hw = FRAME_SIZE // 8
        self.layers = [
            Conv2d(TRUNK_CHANNELS, 16, 4, 2, 1, rng=rng, name="trunk1", dtype=dtype),
            BatchNorm2d(16, hp.bn_epsilon, hp.bn_momentum, name="trunk1_bn", dtype=dtype),
            LeakyReLU(hp.leaky_slope),
            Conv2d(16, 32, 4, 2, 1, rng=rng, name="trunk2", dtype=dtype),
            BatchNorm2d(32, hp.bn_epsilon, hp.bn_momentum, name="trunk2_bn", dtype=dtype),
            LeakyReLU(hp.leaky_slope),
            Conv2d(32, 64, 4, 2, 1, rng=rng, name="trunk3", dtype=dtype),
            BatchNorm2d(64, hp.bn_epsilon, hp.bn_momentum, name="trunk3_bn", dtype=dtype),
            LeakyReLU(hp.leaky_slope),
        ]

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for lp in Sequential(self.layers).layer_params():
            for _, tensor in lp.trainable():
                digest.update(tensor.data.tobytes())
        return digest.hexdigest()


class _Net:
    """Shared plumbing: parameter listing, naming, and trunk checksums."""

    net: Sequential
    trunk: SharedTrunk | None = None

    def layer_params(self):
        return self.net.layer_params()

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for lp in self.layer_params():
            out.append((f"{lp.name}.weight", lp.weight.data))
            if lp.bias is not None:
                out.append((f"{lp.name}.bias", lp.bias.data))
            if lp.running_mean is not None:
                out.append((f"{lp.name}.running_mean", lp.running_mean))
            if lp.running_var is not None:
                out.append((f"{lp.name}.running_var", lp.running_var))
        return out

    def trunk_checksum(self) -> str | None:
        return self.trunk.checksum() if self.trunk is not None else None


class Generator(_Net):
    """G(x(t), key) -> predicted x(t+1); encoder-decoder, tanh output."""

    def __init__(self, rng: Prng, hp: Hyperparams | None = None, dtype=np.float32,
                 trunk: SharedTrunk | None = None):
        hp = hp or Hyperparams()
        self.dtype = dtype
        self.trunk = trunk
        if trunk is None:
            encoder = [
                Conv2d(4, 16, 4, 2, 1, rng=rng, name="enc1", dtype=dtype),
                BatchNorm2d(16, hp.bn_epsilon, hp.bn_momentum, name="enc1_bn", dtype=dtype),
                LeakyReLU(hp.leaky_slope),
                Conv2d(16, 32, 4, 2, 1, rng=rng, name="enc2", dtype=dtype),
                BatchNorm2d(32, hp.bn_epsilon, hp.bn_momentum, name="enc2_bn", dtype=dtype),
                LeakyReLU(hp.leaky_slope),
                Conv2d(32, 64, 4, 2, 1, rng=rng, name="enc3", dtype=dtype),
                BatchNorm2d(64, hp.bn_epsilon, hp.bn_momentum, name="enc3_bn", dtype=dtype),
                LeakyReLU(hp.leaky_slope),
            ]
        else:
            encoder = [ChannelPad(4, TRUNK_CHANNELS)] + trunk.layers
        decoder = [
            ConvTranspose2d(64, 32, 4, 2, 1, rng=rng, name="dec1", dtype=dtype),
            BatchNorm2d(32, hp.bn_epsilon, hp.bn_momentum, name="dec1_bn", dtype=dtype),
            ReLU(),
            ConvTranspose2d(32, 16, 4, 2, 1, rng=rng, name="dec2", dtype=dtype),
            BatchNorm2d(16, hp.bn_epsilon, hp.bn_momentum, name="dec2_bn", dtype=dtype),
            ReLU(),
            ConvTranspose2d(16, 1, 4, 2, 1, rng=rng, name="dec3", dtype=dtype),
            Tanh(),
        ]
        self.net = Sequential(encoder + decoder)

    def forward(self, frames: np.ndarray, actions, training: bool) -> np.ndarray:
        if frames.ndim != 4 or frames.shape[1] != 1:
            raise DimensionError(f"generator expects [N,1,H,W] frames, got {frames.shape}")
        n, _, h, w = frames.shape
        x = np.concatenate([frames, action_channels(actions, h, w, self.dtype)], axis=1)
        return self.net.forward(x, training)

    def backward(self, dout: np.ndarray) -> None:
        self.net.backward(dout)


class Discriminator(_Net):
    """D(x(t), key, x(t+1)) -> probability the pair is a real transition.

    Conditioned on the current frame and key press by default; the
    ``conditional`` flag drops that context, and ``input_batchnorm``
    switches to normalizing the raw input batch instead of skipping
    batch norm on the first layer.
    """

    FRAME_T1_CHANNEL = 1  # channel layout: [frame_t, frame_t1, key one-hots]

    def __init__(self, rng: Prng, hp: Hyperparams | None = None, dtype=np.float32,
                 conditional: bool = True, input_batchnorm: bool = False,
                 trunk: SharedTrunk | None = None):
        hp = hp or Hyperparams()
        self.dtype = dtype
        self.conditional = conditional
        self.trunk = trunk
        in_ch = 5 if conditional else 1
        self.frame_t1_channel = self.FRAME_T1_CHANNEL if conditional else 0
        if trunk is None:
            stack: list[Layer] = []
            if input_batchnorm:
                stack.append(BatchNorm2d(in_ch, hp.bn_epsilon, hp.bn_momentum,
                                         name="input_bn", dtype=dtype))
            stack += [
                Conv2d(in_ch, 16, 4, 2, 1, rng=rng, name="d1", dtype=dtype),
                LeakyReLU(hp.leaky_slope),
                Conv2d(16, 32, 4, 2, 1, rng=rng, name="d2", dtype=dtype),
                BatchNorm2d(32, hp.bn_epsilon, hp.bn_momentum, name="d2_bn", dtype=dtype),
                LeakyReLU(hp.leaky_slope),
                Conv2d(32, 64, 4, 2, 1, rng=rng, name="d3", dtype=dtype),
                BatchNorm2d(64, hp.bn_epsilon, hp.bn_momentum, name="d3_bn", dtype=dtype),
                LeakyReLU(hp.leaky_slope),
            ]
        else:
            stack = [ChannelPad(in_ch, TRUNK_CHANNELS)] + trunk.layers
        head = [Conv2d(64, 1, 8, 1, 0, rng=rng, name="d_out", dtype=dtype), Sigmoid()]
        self.net = Sequential(stack + head)

    def _assemble(self, frames_t, frames_t1, actions):
        if self.conditional:
            n, _, h, w = frames_t1.shape
            return np.concatenate(
                [frames_t, frames_t1, action_channels(actions, h, w, self.dtype)], axis=1)
        return frames_t1

    def forward(self, frames_t, frames_t1, actions, training: bool) -> np.ndarray:
        out = self.net.forward(self._assemble(frames_t, frames_t1, actions), training)
        return out.reshape(out.shape[0])

    def backward(self, dprobs: np.ndarray) -> np.ndarray:
        """Returns the gradient w.r.t. the assembled input stack."""
        return self.net.backward(dprobs.reshape(-1, 1, 1, 1))


class Classifier(_Net):
    """C(x(t), x(t+1)) -> key-press logits. One convolution trunk applied to
    both frames (weights shared), features concatenated into a dense head."""

    def __init__(self, rng: Prng, hp: Hyperparams | None = None, dtype=np.float32,
                 trunk: SharedTrunk | None = None):
        hp = hp or Hyperparams()
        self.dtype = dtype
        self.trunk = trunk
        if trunk is None:
            self.trunk_net = Sequential([
                Conv2d(1, 8, 5, 1, 2, rng=rng, name="conv1", dtype=dtype),
                BatchNorm2d(8, hp.bn_epsilon, hp.bn_momentum, name="conv1_bn", dtype=dtype),
                ReLU(),
                MaxPool2d(3, 2),
                Conv2d(8, 16, 5, 1, 2, rng=rng, name="conv2", dtype=dtype),
                BatchNorm2d(16, hp.bn_epsilon, hp.bn_momentum, name="conv2_bn", dtype=dtype),
                ReLU(),
                MaxPool2d(3, 2),
                Conv2d(16, 24, 3, 1, 1, rng=rng, name="conv3", dtype=dtype),
                BatchNorm2d(24, hp.bn_epsilon, hp.bn_momentum, name="conv3_bn", dtype=dtype),
                ReLU(),
                Conv2d(24, 24, 3, 1, 1, rng=rng, name="conv4", dtype=dtype),
                BatchNorm2d(24, hp.bn_epsilon, hp.bn_momentum, name="conv4_bn", dtype=dtype),
                ReLU(),
                Conv2d(24, 16, 3, 1, 1, rng=rng, name="conv5", dtype=dtype),
                BatchNorm2d(16, hp.bn_epsilon, hp.bn_momentum, name="conv5_bn", dtype=dtype),
                ReLU(),
                MaxPool2d(3, 2),
            ])
            feature_size = 16 * 7 * 7
        else:
            self.trunk_net = Sequential([ChannelPad(1, TRUNK_CHANNELS)] + trunk.layers)
            feature_size = trunk.out_channels * trunk.out_hw * trunk.out_hw
        self.flatten = Flatten()
        self.head = Sequential([
            Dense(2 * feature_size, 256, rng=rng, name="fc1", dtype=dtype),
            ReLU(),
            Dropout(hp.dropout_p, rng),
            Dense(256, 128, rng=rng, name="fc2", dtype=dtype),
            ReLU(),
            Dropout(hp.dropout_p, rng),
            Dense(128, 64, rng=rng, name="fc3", dtype=dtype),
            ReLU(),
            Dense(64, 3, rng=rng, name="readout", dtype=dtype),
        ])
        self._n = 0

    def per_frame_features(self, frames: np.ndarray, training: bool) -> np.ndarray:
        feats = self.trunk_net.forward(frames, training)
        return feats.reshape(feats.shape[0], -1)

    def forward(self, frames_t, frames_t1, training: bool) -> np.ndarray:
        if frames_t.shape != frames_t1.shape:
            raise DimensionError(
                f"frame pair shapes differ: {frames_t.shape} vs {frames_t1.shape}")
        n = frames_t.shape[0]
        self._n = n
        # both branches ride one batch so the shared trunk runs (and caches) once
        both = np.concatenate([frames_t, frames_t1], axis=0)
        flat = self.flatten.forward(self.trunk_net.forward(both, training), training)
        joint = np.concatenate([flat[:n], flat[n:]], axis=1)
        return self.head.forward(joint, training)

    def backward(self, dlogits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        djoint = self.head.backward(dlogits)
        half = djoint.shape[1] // 2
        dflat = np.concatenate([djoint[:, :half], djoint[:, half:]], axis=0)
        dboth = self.trunk_net.backward(self.flatten.backward(dflat))
        return dboth[: self._n], dboth[self._n :]

    def layer_params(self):
        return self.trunk_net.layer_params() + self.head.layer_params()


def build_models(seed: int, hp: Hyperparams | None = None, dtype=np.float32,
                 shared_trunk: bool = False,
                 conditional_disc: bool = True, disc_input_batchnorm: bool = False,
                 ) -> tuple[Generator, Discriminator, Classifier]:
    """All three networks from one seed; with ``shared_trunk`` they reuse a
    single convolution parameter set."""
    hp = hp or Hyperparams()
    trunk = SharedTrunk(Prng(derive_seed(seed, 0x7253)), hp, dtype) if shared_trunk else None
    gen = Generator(Prng(derive_seed(seed, 1)), hp, dtype, trunk=trunk)
    disc = Discriminator(Prng(derive_seed(seed, 2)), hp, dtype, conditional=conditional_disc,
                         input_batchnorm=disc_input_batchnorm, trunk=trunk)
    cls = Classifier(Prng(derive_seed(seed, 3)), hp, dtype, trunk=trunk)
    return gen, disc, cls


def save_checkpoint(net: _Net, path) -> None:
    """Named-tensor container: magic, version, then one entry per tensor."""
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<H", CKPT_VERSION))
        for name, arr in net.named_tensors():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype=np.float32).tobytes())


def read_checkpoint(path) -> list[tuple[str, np.ndarray]]:
    entries = []
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CKPT_MAGIC:
            raise CheckpointError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<H", fh.read(2))
        if version != CKPT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        while True:
            raw = fh.read(2)
            if not raw:
                break
            (name_len,) = struct.unpack("<H", raw)
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<B", fh.read(1))
            dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            count = int(np.prod(dims)) if rank else 1
            data = fh.read(4 * count)
            if len(data) < 4 * count:
                raise CheckpointError(f"checkpoint truncated in tensor '{name}'")
            entries.append((name, np.frombuffer(data, dtype=np.float32).reshape(dims).copy()))
    return entries


def load_checkpoint(path, net: _Net) -> None:
    """Load saved tensors into a freshly built network of the same spec."""
    entries = read_checkpoint(path)
    stored_by_name = dict(entries)
    if len(stored_by_name) != len(entries):
        raise CheckpointError("duplicate tensor names in checkpoint")
    for name, arr in net.named_tensors():
        if name not in stored_by_name:
            raise CheckpointError(f"checkpoint missing tensor '{name}'")
        stored = stored_by_name.pop(name)
        if stored.shape != arr.shape:
            raise CheckpointError(
                f"tensor '{name}' has dims {stored.shape}, expected {arr.shape}")
        arr[...] = stored.astype(arr.dtype)
    if stored_by_name:
        raise CheckpointError(f"unexpected tensor '{next(iter(stored_by_name))}' in checkpoint")


def count_layers(net: _Net, layer_type) -> int:
    total = 0
    stacks = [net.net.layers] if hasattr(net, "net") else []
    if isinstance(net, Classifier):
        stacks = [net.trunk_net.layers, net.head.layers]
    for layers in stacks:
        total += sum(1 for layer in layers if isinstance(layer, layer_type))
    return total
