"""Versioned on-disk records for genotypes and run checkpoints.

Containers are zip archives of raw numpy arrays plus one JSON manifest
(numpy's ``savez`` format, loaded with ``allow_pickle=False``).  Per
genotype the payload is three arrays in fixed order: the input string
(row-major), the flat LSTM parameter vector (stroke banks then top banks),
and the optional background; string length, bank counts and mode live in
the manifest.
"""

from __future__ import annotations

import hashlib
import json
import os
import zipfile

import numpy as np

from evobrush.genome import (
    FLAT_OUT_DIM,
    GENOME_DIM,
    HIER_OUT_DIM,
    TOP_OUT_DIM,
    Genotype,
    LstmParams,
    pack_params,
    unpack_params,
)

FORMAT_VERSION = 1


class CheckpointFormatError(RuntimeError):
    """The file is not a readable genotype/checkpoint record."""


def _genotype_meta(g: Genotype) -> dict:
    return {
        "mode": g.mode,
        "length": g.length,
        "num_stroke_lstms": g.num_stroke_lstms,
        "num_top_lstms": g.num_top_lstms,
        "hidden_dim": g.stroke_lstms[0].hidden_dim,
        "s_max": g.s_max,
        "s1_max": g.s1_max,
        "l_max": g.l_max,
        "has_background": g.background is not None,
    }


def _zero_bank(hidden_dim: int, out_dim: int) -> LstmParams:
    return LstmParams(
        np.zeros((4, hidden_dim, GENOME_DIM + hidden_dim)),
        np.zeros((4, hidden_dim)),
        np.zeros((out_dim, hidden_dim)),
        np.zeros(out_dim),
    )


def _genotype_from_parts(meta: dict, input_string: np.ndarray, params: np.ndarray,
                         background: np.ndarray | None) -> Genotype:
    mode = meta["mode"]
    hidden = int(meta["hidden_dim"])
    stroke_out = FLAT_OUT_DIM if mode == "flat" else HIER_OUT_DIM
    template = Genotype(
        mode=mode,
        input_string=np.zeros((int(meta["length"]), GENOME_DIM)),
        stroke_lstms=[_zero_bank(hidden, stroke_out) for _ in range(int(meta["num_stroke_lstms"]))],
        top_lstms=[_zero_bank(hidden, TOP_OUT_DIM) for _ in range(int(meta["num_top_lstms"]))],
        s_max=int(meta["s_max"]),
        s1_max=int(meta["s1_max"]),
        l_max=int(meta["l_max"]),
    )
    stroke, top = unpack_params(np.asarray(params, dtype=np.float64), template)
    g = Genotype(
        mode=mode,
        input_string=np.asarray(input_string, dtype=np.float64).reshape(-1, GENOME_DIM),
        stroke_lstms=stroke,
        top_lstms=top,
        background=None if background is None else np.asarray(background, dtype=np.float64),
        s_max=template.s_max,
        s1_max=template.s1_max,
        l_max=template.l_max,
    )
    g.validate()
    return g


def _genotype_arrays(g: Genotype, prefix: str) -> dict[str, np.ndarray]:
    arrays = {
        f"{prefix}input": g.input_string,
        f"{prefix}params": pack_params(g),
    }
    if g.background is not None:
        arrays[f"{prefix}background"] = g.background
    return arrays


def _write_container(path, manifest: dict, arrays: dict[str, np.ndarray]) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        np.savez(f, manifest=np.frombuffer(
            json.dumps(manifest).encode("utf-8"), dtype=np.uint8), **arrays)
    os.replace(tmp, path)


def _read_container(path):
    try:
        data = np.load(path, allow_pickle=False)
    except (zipfile.BadZipFile, OSError, ValueError) as exc:
        size = os.path.getsize(path) if os.path.exists(path) else -1
        raise CheckpointFormatError(
            f"{path}: not a readable record (file size {size}): {exc}"
        ) from exc
    try:
        manifest = json.loads(bytes(data["manifest"]).decode("utf-8"))
    except (KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: missing or corrupt manifest: {exc}") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported format version {version!r}")
    return manifest, data


def save_genotype(path, g: Genotype) -> None:
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "genotype",
        "genotype": _genotype_meta(g),
    }
    _write_container(path, manifest, _genotype_arrays(g, "g_"))


def load_genotype(path) -> Genotype:
    manifest, data = _read_container(path)
    if manifest.get("kind") != "genotype":
        raise CheckpointFormatError(f"{path}: expected a genotype record, got {manifest.get('kind')!r}")
    meta = manifest["genotype"]
    try:
        background = data["g_background"] if meta["has_background"] else None
        return _genotype_from_parts(meta, data["g_input"], data["g_params"], background)
    except (KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: malformed genotype payload: {exc}") from exc


def config_hash(config_dict: dict) -> str:
    blob = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_checkpoint(
    path,
    *,
    config_dict: dict,
    master_seed: int,
    next_tournament: int,
    genotypes: list[Genotype],
    stats_state: dict,
    best_genotype: Genotype | None,
) -> None:
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "checkpoint",
        "config_hash": config_hash(config_dict),
        "master_seed": int(master_seed),
        "next_tournament": int(next_tournament),
        "population_size": len(genotypes),
        "stats": stats_state,
        "genotypes": [_genotype_meta(g) for g in genotypes],
        "best": None if best_genotype is None else _genotype_meta(best_genotype),
    }
    arrays: dict[str, np.ndarray] = {}
    for i, g in enumerate(genotypes):
        arrays.update(_genotype_arrays(g, f"p{i:04d}_"))
    if best_genotype is not None:
        arrays.update(_genotype_arrays(best_genotype, "best_"))
    _write_container(path, manifest, arrays)


def load_checkpoint(path) -> dict:
    manifest, data = _read_container(path)
    if manifest.get("kind") != "checkpoint":
        raise CheckpointFormatError(f"{path}: expected a checkpoint record, got {manifest.get('kind')!r}")
    try:
        genotypes = []
        for i, meta in enumerate(manifest["genotypes"]):
            prefix = f"p{i:04d}_"
            background = data[f"{prefix}background"] if meta["has_background"] else None
            genotypes.append(_genotype_from_parts(
                meta, data[f"{prefix}input"], data[f"{prefix}params"], background))
        best = None
        if manifest.get("best") is not None:
            meta = manifest["best"]
            background = data["best_background"] if meta["has_background"] else None
            best = _genotype_from_parts(meta, data["best_input"], data["best_params"], background)
    except (KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: malformed checkpoint payload: {exc}") from exc
    return {
        "config_hash": manifest["config_hash"],
        "master_seed": int(manifest["master_seed"]),
        "next_tournament": int(manifest["next_tournament"]),
        "genotypes": genotypes,
        "stats": manifest["stats"],
        "best_genotype": best,
    }
