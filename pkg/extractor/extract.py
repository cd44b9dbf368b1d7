#!/usr/bin/env python3
"""Offline patch-embedding extractor.

Runs a frozen self-supervised ViT backbone over an image folder (center crop
224, test protocol), collects the raw patch-token grid of every image, and
writes the .pfse embedding format consumed by the mdmf toolkit.  Tokens are
exported before the backbone's final layer norm and before any pooling, so one
extraction serves every patch-granularity experiment downstream.

Backbone weights load from --weights (a DINOv2 torch-hub state dict for the
chosen variant).  Without weights the backbone is initialised from a fixed seed
and a warning is printed: the output format, shapes, and determinism are then
still exercised end to end, but the embeddings carry no pretrained semantics.

Usage:
    extract.py --dir images/ --label real --variant vits14 --out real.pfse
"""

import argparse
import math
import struct
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from PIL import Image, UnidentifiedImageError

CROP = 224
PATCH = 14
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

# DINOv2 architecture table: dim, depth, heads, ffn type.
VARIANTS = {
    "vits14": dict(embed_dim=384, depth=12, num_heads=6, ffn="mlp"),
    "vitb14": dict(embed_dim=768, depth=12, num_heads=12, ffn="mlp"),
    "vitl14": dict(embed_dim=1024, depth=24, num_heads=16, ffn="mlp"),
    "vitg14": dict(embed_dim=1536, depth=40, num_heads=24, ffn="swiglufused"),
}

MAGIC = b"MDMF"
FORMAT_VERSION = 1
FLAG_LABELS = 1
FLAG_SOURCE_IDS = 2
LABEL_BYTES = {"real": 0, "generated": 1}

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".webp", ".tif", ".tiff"}


@dataclass
class ExtractJob:
    image_dir: Path
    label: str
    variant: str
    out_path: Path
    batch_size: int = 16
    device: str = "cpu"
    weights: Path | None = None
    seed: int = 0

    def __post_init__(self):
        self.image_dir = Path(self.image_dir)
        self.out_path = Path(self.out_path)
        if not self.image_dir.is_dir():
            raise ValueError(f"image directory not found: {self.image_dir}")
        if self.label not in LABEL_BYTES:
            raise ValueError(f"label must be real|generated, got {self.label!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {sorted(VARIANTS)}")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")


class LayerScale(nn.Module):
    def __init__(self, dim, init=1e-5):
        super().__init__()
        self.gamma = nn.Parameter(init * torch.ones(dim))

    def forward(self, x):
        return x * self.gamma


class Attention(nn.Module):
    def __init__(self, dim, num_heads):
        super().__init__()
        self.num_heads = num_heads
        self.scale = (dim // num_heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3, bias=True)
        self.proj = nn.Linear(dim, dim, bias=True)

    def forward(self, x):
        b, n, d = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.num_heads, d // self.num_heads)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)
        attn = (q @ k.transpose(-2, -1)) * self.scale
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.proj(out)


class Mlp(nn.Module):
    def __init__(self, dim, hidden):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden, bias=True)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim, bias=True)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class SwiGLUFFNFused(nn.Module):
    """Fused SwiGLU feed-forward as used by the giant variant."""

    def __init__(self, dim, hidden):
        super().__init__()
        hidden = (int(hidden * 2 / 3) + 7) // 8 * 8
        self.w12 = nn.Linear(dim, 2 * hidden, bias=True)
        self.w3 = nn.Linear(hidden, dim, bias=True)

    def forward(self, x):
        x12 = self.w12(x)
        x1, x2 = x12.chunk(2, dim=-1)
        return self.w3(nn.functional.silu(x1) * x2)


class Block(nn.Module):
    def __init__(self, dim, num_heads, ffn):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, eps=1e-6)
        self.attn = Attention(dim, num_heads)
        self.ls1 = LayerScale(dim)
        self.norm2 = nn.LayerNorm(dim, eps=1e-6)
        hidden = dim * 4
        self.mlp = SwiGLUFFNFused(dim, hidden) if ffn == "swiglufused" \
            else Mlp(dim, hidden)
        self.ls2 = LayerScale(dim)

    def forward(self, x):
        x = x + self.ls1(self.attn(self.norm1(x)))
        x = x + self.ls2(self.mlp(self.norm2(x)))
        return x


class VisionTransformer(nn.Module):
    """DINOv2-layout ViT; forward returns raw patch tokens (pre final norm)."""

    # pos_embed is stored at the 518-pixel training resolution (37x37 grid).
    TRAIN_GRID = 37

    def __init__(self, embed_dim, depth, num_heads, ffn):
        super().__init__()
        self.embed_dim = embed_dim
        self.patch_embed = PatchEmbed(embed_dim)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, embed_dim))
        self.pos_embed = nn.Parameter(
            torch.zeros(1, self.TRAIN_GRID**2 + 1, embed_dim))
        self.blocks = nn.ModuleList(
            [Block(embed_dim, num_heads, ffn) for _ in range(depth)])
        self.norm = nn.LayerNorm(embed_dim, eps=1e-6)  # unused for raw tokens

    def interpolated_pos_embed(self, grid):
        if grid == self.TRAIN_GRID:
            return self.pos_embed
        cls_pos = self.pos_embed[:, :1]
        patch_pos = self.pos_embed[:, 1:].reshape(
            1, self.TRAIN_GRID, self.TRAIN_GRID, self.embed_dim).permute(0, 3, 1, 2)
        patch_pos = nn.functional.interpolate(
            patch_pos, size=(grid, grid), mode="bicubic", align_corners=False)
        patch_pos = patch_pos.permute(0, 2, 3, 1).reshape(1, grid * grid,
                                                          self.embed_dim)
        return torch.cat([cls_pos, patch_pos], dim=1)

    def forward(self, images):
        x = self.patch_embed(images)
        grid = int(math.isqrt(x.shape[1]))
        cls = self.cls_token.expand(x.shape[0], -1, -1)
        x = torch.cat([cls, x], dim=1) + self.interpolated_pos_embed(grid)
        for block in self.blocks:
            x = block(x)
        return x[:, 1:, :]


class PatchEmbed(nn.Module):
    def __init__(self, embed_dim):
        super().__init__()
        self.proj = nn.Conv2d(3, embed_dim, kernel_size=PATCH, stride=PATCH)

    def forward(self, x):
        return self.proj(x).flatten(2).transpose(1, 2)


def build_backbone(variant, weights=None, seed=0):
    spec = VARIANTS[variant]
    torch.manual_seed(seed)
    model = VisionTransformer(spec["embed_dim"], spec["depth"], spec["num_heads"],
                              spec["ffn"])
    if weights is not None:
        state = torch.load(weights, map_location="cpu", weights_only=True)
        if isinstance(state, dict) and "teacher" in state:
            state = state["teacher"]
        state = {k.replace("backbone.", ""): v for k, v in state.items()
                 if "dino_head" not in k and not k.startswith("mask_token")}
        missing, unexpected = model.load_state_dict(state, strict=False)
        missing = [k for k in missing if not k.startswith("norm.")]
        if missing or unexpected:
            raise ValueError(f"state dict does not match {variant}: "
                             f"missing {missing[:4]}, unexpected {unexpected[:4]}")
    else:
        print(f"warning: no --weights given; using a seed-{seed} random "
              f"initialisation of {variant} (format/shape runs only)",
            file=sys.stderr)
    model.eval()
    return model


def preprocess(image: Image.Image) -> torch.Tensor:
    """Center crop 224 (test protocol); images smaller than 224 on a side are
    bilinearly upscaled first."""
    image = image.convert("RGB")
    w, h = image.size
    short = min(w, h)
    if short < CROP:
        scale = CROP / short
        image = image.resize((max(CROP, round(w * scale)),
                              max(CROP, round(h * scale))), Image.BILINEAR)
        w, h = image.size
    left = (w - CROP) // 2
    top = (h - CROP) // 2
    image = image.crop((left, top, left + CROP, top + CROP))
    array = np.asarray(image, dtype=np.float32) / 255.0
    array = (array - np.array(IMAGENET_MEAN, dtype=np.float32)) \
        / np.array(IMAGENET_STD, dtype=np.float32)
    return torch.from_numpy(array.transpose(2, 0, 1))


def list_images(directory: Path):
    return sorted(p for p in directory.iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def write_pfse(path: Path, tokens: np.ndarray, label: str, source_ids) -> None:
    """Emit format version 1: header, float32 LE payload, labels, id table."""
    n, patch_count, dim = tokens.shape
    payload = np.ascontiguousarray(tokens, dtype="<f4").tobytes()
    with tempfile.NamedTemporaryFile(dir=path.parent, prefix=".tmp-",
                                     suffix="~", delete=False) as tmp:
        tmp.write(struct.pack("<4sIIIII", MAGIC, FORMAT_VERSION, n, patch_count,
                              dim, FLAG_LABELS | FLAG_SOURCE_IDS))
        tmp.write(payload)
        tmp.write(bytes([LABEL_BYTES[label]] * n))
        for sid in source_ids:
            raw = sid.encode("utf-8")
            tmp.write(struct.pack("<H", len(raw)))
            tmp.write(raw)
        tmp_path = Path(tmp.name)
    tmp_path.replace(path)


def extract(job: ExtractJob) -> dict:
    """Run the backbone over the folder and write the .pfse file.

    Returns counters: images written, images skipped (undecodable).
    """
    model = build_backbone(job.variant, job.weights, job.seed).to(job.device)
    dim = VARIANTS[job.variant]["embed_dim"]
    grid = CROP // PATCH
    paths = list_images(job.image_dir)

    tensors, ids, skipped = [], [], 0
    for path in paths:
        try:
            with Image.open(path) as img:
                tensors.append(preprocess(img))
            ids.append(path.name)
        except (UnidentifiedImageError, OSError) as exc:
            skipped += 1
            print(f"warning: skipping undecodable image {path.name}: {exc}",
                  file=sys.stderr)

    chunks = []
    with torch.no_grad():
        for start in range(0, len(tensors), job.batch_size):
            batch = torch.stack(tensors[start:start + job.batch_size]).to(job.device)
            chunks.append(model(batch).cpu().numpy())
    tokens = (np.concatenate(chunks) if chunks
              else np.zeros((0, grid * grid, dim), dtype=np.float32))
    if not np.all(np.isfinite(tokens)):
        raise RuntimeError("backbone produced non-finite tokens")
    write_pfse(job.out_path, tokens, job.label, ids)
    return {"written": len(ids), "skipped": skipped,
            "patch_count": grid * grid, "embed_dim": dim}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dir", required=True, help="folder of images")
    parser.add_argument("--label", required=True, choices=sorted(LABEL_BYTES))
    parser.add_argument("--variant", default="vitl14", choices=sorted(VARIANTS))
    parser.add_argument("--out", required=True, help="output .pfse path")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--weights", default=None,
                        help="path to a DINOv2 state dict for the variant")
    parser.add_argument("--seed", type=int, default=0,
                        help="init seed when running without weights")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        job = ExtractJob(image_dir=args.dir, label=args.label, variant=args.variant,
                         out_path=args.out, batch_size=args.batch_size,
                         device=args.device,
                         weights=Path(args.weights) if args.weights else None,
                         seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        stats = extract(job)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {stats['written']} records "
          f"(K={stats['patch_count']}, D={stats['embed_dim']}) to {job.out_path}; "
          f"skipped {stats['skipped']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
