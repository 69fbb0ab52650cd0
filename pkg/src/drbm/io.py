"""Dataset readers, image writers, and the model container format.

Datasets arrive either as IDX files (the big-endian format MNIST ships
in) or as directories of binary netpbm images (P5 grayscale, P6 RGB,
maxval 255).  Pixel values are mapped onto the unit range {0..n_levels}
on load: thresholded at 128 for binary units, proportionally rescaled
and rounded otherwise.

Models are stored in a little-endian container: magic "DRBM", a u32
format version, one block per layer, and a trailing CRC32 of everything
before it.  Convolutional blocks record the spatial input size so a
loaded model can still reshape flat activity and generate images.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .activations import SIGMOID, ActivationSpec
from .params import ConvRbmParams, DbnModel, RbmParams

MODEL_MAGIC = b"DRBM"
MODEL_VERSION = 1
_LAYER_DENSE = 0
_LAYER_CONV = 1
_UNIT_KIND_CODES = {SIGMOID: 0}
_UNIT_KIND_NAMES = {0: SIGMOID}


class DataFormatError(Exception):
    """Base class for every malformed-input error raised by this module."""


class BadMagicError(DataFormatError):
    pass


class TruncatedFileError(DataFormatError):
    pass


class MalformedHeaderError(DataFormatError):
    pass


class UnsupportedMaxvalError(DataFormatError):
    pass


class DimensionMismatchError(DataFormatError):
    pass


class UnsupportedVersionError(DataFormatError):
    pass


class ChecksumError(DataFormatError):
    pass


@dataclass
class ImageDataset:
    """Images as (count, channels, height, width) floats in 0..n_levels."""

    samples: np.ndarray
    labels: np.ndarray | None
    n_levels: int

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.samples.shape[1:]

    def flat(self) -> np.ndarray:
        """Samples flattened to (count, features) in C order."""
        return self.samples.reshape(self.count, -1)


def map_levels(raw: np.ndarray, n_levels: int) -> np.ndarray:
    """Map byte values 0..255 onto unit levels 0..n_levels.

    Binary units threshold at 128; anything else rescales and rounds, so
    n_levels = 255 is the identity on integer input.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if n_levels == 1:
        return (raw >= 128.0).astype(np.float64)
    return np.rint(raw * (n_levels / 255.0))


def _idx_header(data: bytes, path, expect_dims: int):
    if len(data) < 4:
        raise TruncatedFileError(f"{path}: shorter than the 4-byte magic")
    if data[0] != 0 or data[1] != 0:
        raise BadMagicError(f"{path}: first two magic bytes must be zero")
    if data[2] != 0x08:
        raise BadMagicError(
            f"{path}: only unsigned-byte IDX data is supported, got type "
            f"0x{data[2]:02x}"
        )
    ndim = data[3]
    if ndim != expect_dims:
        raise BadMagicError(
            f"{path}: expected {expect_dims}-dimensional IDX data, got {ndim}"
        )
    need = 4 + 4 * ndim
    if len(data) < need:
        raise TruncatedFileError(f"{path}: header ends before its dimensions")
    dims = struct.unpack(f">{ndim}I", data[4:need])
    return dims, need


def load_idx(
    images_path, labels_path=None, n_levels: int = 255
) -> ImageDataset:
    """Read an IDX image file (and optional matching label file)."""
    data = Path(images_path).read_bytes()
    (count, rows, cols), offset = _idx_header(data, images_path, 3)
    need = count * rows * cols
    body = data[offset : offset + need]
    if len(body) < need:
        raise TruncatedFileError(
            f"{images_path}: expected {need} pixels, found {len(body)}"
        )
    raw = np.frombuffer(body, dtype=np.uint8).reshape(count, 1, rows, cols)

    labels = None
    if labels_path is not None:
        ldata = Path(labels_path).read_bytes()
        (lcount,), loffset = _idx_header(ldata, labels_path, 1)
        if lcount != count:
            raise DimensionMismatchError(
                f"{labels_path}: {lcount} labels for {count} images"
            )
        lbody = ldata[loffset : loffset + lcount]
        if len(lbody) < lcount:
            raise TruncatedFileError(
                f"{labels_path}: expected {lcount} labels, found {len(lbody)}"
            )
        labels = np.frombuffer(lbody, dtype=np.uint8).astype(np.int64)
    return ImageDataset(map_levels(raw, n_levels), labels, n_levels)


_WS = (ord(" "), ord("\t"), ord("\r"), ord("\n"))


def _netpbm_tokens(data: bytes, path, count: int):
    """First `count` whitespace-separated header tokens plus raster start."""
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise TruncatedFileError(f"{path}: header ends mid-way")
        c = data[i]
        if c in _WS:
            i += 1
            continue
        if c == ord("#"):
            while i < len(data) and data[i] != ord("\n"):
                i += 1
            continue
        j = i
        while j < len(data) and data[j] not in _WS and data[j] != ord("#"):
            j += 1
        tokens.append(data[i:j])
        i = j
    if i >= len(data):
        raise TruncatedFileError(f"{path}: no raster after the header")
    return tokens, i + 1


def load_ppm(path) -> np.ndarray:
    """Read one binary netpbm image; returns (C, H, W) floats in 0..255."""
    data = Path(path).read_bytes()
    tokens, raster = _netpbm_tokens(data, path, 4)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise BadMagicError(
            f"{path}: expected binary netpbm magic P5 or P6, got {magic!r}"
        )
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedHeaderError(
            f"{path}: non-numeric header fields {tokens[1:]}"
        ) from None
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"{path}: bad image size {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxvalError(
            f"{path}: only maxval 255 is supported, got {maxval}"
        )
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    body = data[raster : raster + need]
    if len(body) < need:
        raise TruncatedFileError(
            f"{path}: raster has {len(body)} bytes, expected {need}"
        )
    raw = np.frombuffer(body, dtype=np.uint8).reshape(height, width, channels)
    return np.moveaxis(raw, 2, 0).astype(np.float64)


def load_ppm_dir(directory, n_levels: int = 255) -> ImageDataset:
    """Read every .pgm/.ppm/.pnm file in a directory, sorted by name."""
    directory = Path(directory)
    paths = sorted(
        p for p in directory.iterdir() if p.suffix in (".pgm", ".ppm", ".pnm")
    )
    if not paths:
        raise DataFormatError(f"{directory}: no netpbm images found")
    images = []
    for p in paths:
        img = load_ppm(p)
        if images and img.shape != images[0].shape:
            raise DimensionMismatchError(
                f"{p}: shape {img.shape} differs from first image "
                f"{images[0].shape}"
            )
        images.append(img)
    return ImageDataset(map_levels(np.stack(images), n_levels), None, n_levels)


def save_ppm(path, image: np.ndarray, n_levels: int = 255) -> None:
    """Write one image with values in 0..n_levels as a binary P5/P6 file.

    Values rescale to 0..255 and round half up; a (H, W) array is
    treated as single-channel.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ValueError(
            f"image must be (H, W), (1, H, W) or (3, H, W), got {img.shape}"
        )
    scaled = img * (255.0 / n_levels)
    bytes_img = np.clip(np.floor(scaled + 0.5), 0.0, 255.0).astype(np.uint8)
    magic = b"P5" if img.shape[0] == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, img.shape[2], img.shape[1])
    raster = np.moveaxis(bytes_img, 0, 2).tobytes()
    Path(path).write_bytes(header + raster)


def _spec_bytes(spec: ActivationSpec) -> bytes:
    return struct.pack(
        "<IdB", spec.n_levels, spec.scale, _UNIT_KIND_CODES[spec.unit_kind]
    )


class _Cursor:
    """Sequential little-endian reader with truncation checking."""

    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(
                f"{self.path}: wanted {n} bytes at offset {self.pos}, file "
                f"has {len(self.data)}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def f64(self, *shape) -> np.ndarray:
        n = int(np.prod(shape))
        arr = np.frombuffer(self.take(8 * n), dtype="<f8")
        return arr.reshape(shape).copy()

    def spec(self) -> ActivationSpec:
        n_levels, scale, kind = self.unpack("IdB")
        if kind not in _UNIT_KIND_NAMES:
            raise DataFormatError(f"{self.path}: unknown unit kind code {kind}")
        return ActivationSpec(n_levels, scale, _UNIT_KIND_NAMES[kind])


def save_model(path, model: DbnModel) -> None:
    """Serialize a model to the container format."""
    out = bytearray()
    out += MODEL_MAGIC
    out += struct.pack("<II", MODEL_VERSION, len(model.layers))
    for layer in model.layers:
        if isinstance(layer, RbmParams):
            out += struct.pack("<B", _LAYER_DENSE)
            out += struct.pack("<II", layer.n_visible, layer.n_hidden)
            out += _spec_bytes(layer.visible_spec)
            out += _spec_bytes(layer.hidden_spec)
            out += layer.visible_bias.astype("<f8").tobytes()
            out += layer.hidden_bias.astype("<f8").tobytes()
            out += layer.weights.astype("<f8").tobytes()
        elif isinstance(layer, ConvRbmParams):
            out += struct.pack("<B", _LAYER_CONV)
            in_h, in_w = layer.input_size if layer.input_size else (0, 0)
            out += struct.pack(
                "<IIIIII",
                layer.out_channels,
                layer.in_channels,
                layer.kernel_size,
                layer.stride,
                in_h,
                in_w,
            )
            out += _spec_bytes(layer.visible_spec)
            out += _spec_bytes(layer.hidden_spec)
            out += layer.filters.astype("<f8").tobytes()
            out += layer.hidden_bias.astype("<f8").tobytes()
            out += layer.visible_bias.astype("<f8").tobytes()
        else:
            raise TypeError(f"cannot serialize layer type {type(layer).__name__}")
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(out))


def load_model(path) -> DbnModel:
    """Read a model container, verifying magic, version, and checksum."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MODEL_MAGIC:
        raise BadMagicError(f"{path}: not a model container")
    if len(data) < 16:
        raise TruncatedFileError(f"{path}: too short to hold any layer")
    stored = struct.unpack("<I", data[-4:])[0]
    actual = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored != actual:
        raise ChecksumError(
            f"{path}: checksum {actual:08x} does not match stored {stored:08x}"
        )
    cur = _Cursor(data[:-4], path)
    cur.take(4)
    version, n_layers = cur.unpack("II")
    if version != MODEL_VERSION:
        raise UnsupportedVersionError(
            f"{path}: container version {version}, supported is {MODEL_VERSION}"
        )
    layers = []
    for _ in range(n_layers):
        (kind,) = cur.unpack("B")
        if kind == _LAYER_DENSE:
            n_vis, n_hid = cur.unpack("II")
            vspec = cur.spec()
            hspec = cur.spec()
            layers.append(
                RbmParams(
                    visible_bias=cur.f64(n_vis),
                    hidden_bias=cur.f64(n_hid),
                    weights=cur.f64(n_vis, n_hid),
                    visible_spec=vspec,
                    hidden_spec=hspec,
                )
            )
        elif kind == _LAYER_CONV:
            c_out, c_in, kernel, stride, in_h, in_w = cur.unpack("IIIIII")
            vspec = cur.spec()
            hspec = cur.spec()
            layers.append(
                ConvRbmParams(
                    filters=cur.f64(c_out, c_in, kernel, kernel),
                    hidden_bias=cur.f64(c_out),
                    visible_bias=cur.f64(c_in),
                    stride=stride,
                    visible_spec=vspec,
                    hidden_spec=hspec,
                    input_size=(in_h, in_w) if in_h and in_w else None,
                )
            )
        else:
            raise DataFormatError(f"{path}: unknown layer type {kind}")
    if cur.pos != len(cur.data):
        raise DataFormatError(
            f"{path}: {len(cur.data) - cur.pos} trailing bytes after last layer"
        )
    return DbnModel(layers, {})
