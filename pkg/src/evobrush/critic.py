"""Scoring: (canvas, prompt-or-target) -> fitness.

Built-in critics are deterministic and run fully offline, so the whole
engine can be exercised without any model service.  The external critic is
a thin HTTP client for a dual-encoder scoring service; it never interprets
the fitness value, it only transports it.
"""

from __future__ import annotations

import base64
import threading
from dataclasses import dataclass, field

import numpy as np
import requests

from evobrush.generator import DrawCommandList
from evobrush.raster import Canvas

DOWNSAMPLE_BINS = 12
DEFAULT_STROKE_CAP = 200 * 32  # l_max * s1_max at default configuration
DEFAULT_EVAL_RESOLUTION = 224


class CriticTransportError(RuntimeError):
    """Network-level failure talking to the scoring service (retriable)."""


class CriticProtocolError(RuntimeError):
    """The scoring service answered, but not with a usable reply."""


@dataclass
class CriticScore:
    fitness: float
    components: dict[str, float] = field(default_factory=dict)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm input")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _box_downsample(pix: np.ndarray, bins: int) -> np.ndarray:
    """Mean over a bins x bins grid of rectangular cells, shape (bins, bins, 3)."""
    h, w = pix.shape[:2]
    ys = (np.arange(bins) * h) // bins
    xs = (np.arange(bins) * w) // bins
    cells = np.add.reduceat(np.add.reduceat(pix, ys, axis=0), xs, axis=1)
    cy = np.maximum(np.diff(np.append(ys, h)), 1)
    cx = np.maximum(np.diff(np.append(xs, w)), 1)
    return cells / np.outer(cy, cx)[:, :, None]


def _centered_downsample(canvas: Canvas) -> np.ndarray:
    vec = _box_downsample(canvas.pixels.astype(np.float64), DOWNSAMPLE_BINS).ravel()
    return vec - vec.mean()


def _centered_cosine(a: np.ndarray, b: np.ndarray) -> CriticScore:
    if np.linalg.norm(a) == 0.0 or np.linalg.norm(b) == 0.0:
        return CriticScore(0.0, {"base": 0.0})
    fit = cosine_similarity(a, b)
    return CriticScore(fit, {"base": fit})


def score_target_image(img: Canvas, target: Canvas) -> CriticScore:
    """Cosine similarity of mean-centered coarse downsamples of both images.

    A uniform image centers to the zero vector; its similarity is defined
    as 0 rather than an error.
    """
    if (img.width, img.height) != (target.width, target.height):
        raise ValueError(
            f"dimension mismatch {img.width}x{img.height} vs {target.width}x{target.height}"
        )
    return _centered_cosine(_centered_downsample(img), _centered_downsample(target))


HISTOGRAM_BINS = 16


def _channel_hists(pix: np.ndarray, bins: int = HISTOGRAM_BINS) -> np.ndarray:
    idx = np.minimum((pix.reshape(-1, 3) * bins).astype(np.int64), bins - 1)
    n = idx.shape[0]
    return np.stack([np.bincount(idx[:, c], minlength=bins) / n for c in range(3)])


def score_histogram(img: Canvas, target: Canvas, bins: int = HISTOGRAM_BINS) -> CriticScore:
    """Colour-distribution match: 1 - (mean per-channel L1 histogram distance)/2."""
    if (img.width, img.height) != (target.width, target.height):
        raise ValueError("dimension mismatch")
    d = np.abs(_channel_hists(img.pixels, bins) - _channel_hists(target.pixels, bins)).sum(axis=1).mean()
    fit = float(1.0 - d / 2.0)
    return CriticScore(fit, {"base": fit})


def style_cost(cmds: DrawCommandList, mode: str, weight: float,
               stroke_cap: int = DEFAULT_STROKE_CAP) -> float:
    """Optional pressure toward fewer or more strokes, normalized by a cap."""
    if weight < 0:
        raise ValueError(f"style weight must be >= 0, got {weight}")
    if mode == "off":
        return 0.0
    frac = cmds.stroke_count / stroke_cap
    if mode == "reward-fewer":
        return -weight * frac
    if mode == "reward-more":
        return weight * frac
    raise ValueError(f"unknown style mode {mode!r}")


class TargetImageCritic:
    """Deterministic offline critic: climb toward a target composition."""

    def __init__(self, target: Canvas):
        self.target = target
        self._target_vec = _centered_downsample(target)

    @property
    def eval_size(self) -> tuple[int, int]:
        return (self.target.width, self.target.height)

    def score(self, img: Canvas) -> CriticScore:
        if (img.width, img.height) != self.eval_size:
            raise ValueError("dimension mismatch with target")
        return _centered_cosine(_centered_downsample(img), self._target_vec)


class HistogramCritic:
    """Deterministic offline critic: match a target colour distribution."""

    def __init__(self, target: Canvas):
        self.target = target
        self._target_hist = _channel_hists(target.pixels)

    @property
    def eval_size(self) -> tuple[int, int]:
        return (self.target.width, self.target.height)

    def score(self, img: Canvas) -> CriticScore:
        if (img.width, img.height) != self.eval_size:
            raise ValueError("dimension mismatch with target")
        d = np.abs(_channel_hists(img.pixels) - self._target_hist).sum(axis=1).mean()
        fit = float(1.0 - d / 2.0)
        return CriticScore(fit, {"base": fit})


def build_score_payload(img: Canvas, prompt: str, resolution: int | None = None) -> dict:
    """Wire body for POST /score; the prompt is passed through byte-for-byte."""
    if resolution is not None and (img.width, img.height) != (resolution, resolution):
        img = img.resized(resolution, resolution)
    png = img.to_png_bytes()
    return {"image": base64.b64encode(png).decode("ascii"), "text": prompt}


def _post_json(url: str, payload: dict, timeout: float, retries: int,
               session: requests.Session | None = None) -> dict:
    poster = session.post if session is not None else requests.post
    last = None
    for _ in range(max(1, retries)):
        try:
            resp = poster(url, json=payload, timeout=timeout)
        except requests.RequestException as exc:
            last = exc
            continue
        if resp.status_code >= 500:
            last = CriticTransportError(f"{url} -> HTTP {resp.status_code}")
            continue
        if resp.status_code != 200:
            raise CriticProtocolError(f"{url} -> HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise CriticProtocolError(f"{url} -> unparseable reply: {exc}") from exc
    raise CriticTransportError(f"{url} unreachable after {retries} attempts: {last}")


def score_external(
    img: Canvas,
    prompt: str,
    endpoint: str,
    timeout: float = 10.0,
    retries: int = 3,
    resolution: int = DEFAULT_EVAL_RESOLUTION,
    session: requests.Session | None = None,
) -> CriticScore:
    """Ask a dual-encoder service to score (image, prompt)."""
    payload = build_score_payload(img, prompt, resolution)
    reply = _post_json(endpoint.rstrip("/") + "/score", payload, timeout, retries, session)
    if not isinstance(reply, dict) or "fitness" not in reply:
        raise CriticProtocolError(f"reply missing fitness field: {reply!r}")
    fitness = reply["fitness"]
    if not isinstance(fitness, (int, float)) or not np.isfinite(fitness):
        raise CriticProtocolError(f"non-numeric fitness in reply: {fitness!r}")
    return CriticScore(float(fitness), {"base": float(fitness)})


class ExternalCritic:
    """HTTP client critic bound to one endpoint and one prompt.

    Safe for concurrent use: each worker thread gets its own session, and a
    semaphore caps in-flight requests.
    """

    def __init__(
        self,
        endpoint: str,
        prompt: str,
        timeout: float = 10.0,
        retries: int = 3,
        max_inflight: int = 8,
        resolution: int | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.prompt = prompt
        self.timeout = timeout
        self.retries = retries
        self._slots = threading.Semaphore(max_inflight)
        self._local = threading.local()
        if resolution is None:
            try:
                info = self.health()
                resolution = int(info["resolution"])
            except (CriticTransportError, CriticProtocolError, KeyError, ValueError):
                resolution = DEFAULT_EVAL_RESOLUTION
        self.resolution = resolution

    @property
    def eval_size(self) -> tuple[int, int]:
        return (self.resolution, self.resolution)

    def _session(self) -> requests.Session:
        sess = getattr(self._local, "session", None)
        if sess is None:
            sess = requests.Session()
            self._local.session = sess
        return sess

    def health(self) -> dict:
        try:
            resp = self._session().get(self.endpoint + "/health", timeout=self.timeout)
        except requests.RequestException as exc:
            raise CriticTransportError(f"health check failed: {exc}") from exc
        if resp.status_code != 200:
            raise CriticProtocolError(f"/health -> HTTP {resp.status_code}")
        return resp.json()

    def score(self, img: Canvas) -> CriticScore:
        with self._slots:
            return score_external(
                img,
                self.prompt,
                self.endpoint,
                timeout=self.timeout,
                retries=self.retries,
                resolution=self.resolution,
                session=self._session(),
            )

    def embed_image(self, img: Canvas) -> np.ndarray:
        payload = build_score_payload(img, "", self.resolution)
        reply = _post_json(self.endpoint + "/embed_image", {"image": payload["image"]},
                           self.timeout, self.retries, self._session())
        return np.asarray(reply["embedding"], dtype=np.float64)

    def embed_text(self, text: str) -> np.ndarray:
        reply = _post_json(self.endpoint + "/embed_text", {"text": text},
                           self.timeout, self.retries, self._session())
        return np.asarray(reply["embedding"], dtype=np.float64)
