from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from conftest import make_rng
from test_raster import empty_cmds

from evobrush.critic import (
    CriticProtocolError,
    CriticScore,
    CriticTransportError,
    ExternalCritic,
    HistogramCritic,
    TargetImageCritic,
    build_score_payload,
    cosine_similarity,
    score_external,
    score_histogram,
    score_target_image,
    style_cost,
)
from evobrush.generator import DrawCommandList, EL_WIDTH
from evobrush.raster import Canvas


def test_cosine_identical_direction():
    assert cosine_similarity([1.0, 0.0], [1.0, 0.0]) == 1.0
    assert cosine_similarity([2.0, 0.0], [5.0, 0.0]) == 1.0


def test_cosine_orthogonal():
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0


def test_cosine_hand_computed():
    # dot = 2+2+4 = 8; norms are both 3
    assert cosine_similarity([1, 2, 2], [2, 1, 2]) == pytest.approx(8 / 9, abs=1e-12)


def test_cosine_zero_norm_rejected():
    with pytest.raises(ValueError):
        cosine_similarity([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        cosine_similarity([1.0, 0.0], [0.0, 0.0])


def test_cosine_properties_sample():
    rng = make_rng(3)
    for _ in range(50):
        a = rng.standard_normal(17)
        b = rng.standard_normal(17)
        s = cosine_similarity(a, b)
        assert -1.0 <= s <= 1.0
        assert s == cosine_similarity(b, a)
        assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-12)
        assert cosine_similarity(3.7 * a, b) == pytest.approx(s, abs=1e-12)


def checkerboard(n=224):
    c = Canvas.filled(n, n)
    c.pixels[: n // 2, : n // 2] = 0.0
    c.pixels[n // 2 :, n // 2 :] = 0.0
    return c


def test_target_self_similarity():
    img = checkerboard()
    assert score_target_image(img, img).fitness == pytest.approx(1.0, abs=1e-12)


def test_target_inverted_is_negated():
    img = checkerboard()
    inv = Canvas(1.0 - img.pixels)
    assert score_target_image(inv, img).fitness == pytest.approx(-1.0, abs=1e-12)


def test_target_uniform_image_scores_zero():
    img = Canvas.filled(64, 64, (0.3, 0.3, 0.3))
    target = checkerboard(64)
    assert score_target_image(img, target).fitness == 0.0
    assert score_target_image(target, img).fitness == 0.0


def test_target_dimension_mismatch():
    with pytest.raises(ValueError):
        score_target_image(Canvas.filled(16, 16), Canvas.filled(16, 17))


def test_target_critic_class_matches_function():
    img = checkerboard(96)
    rng = make_rng(5)
    other = Canvas(rng.random((96, 96, 3)).astype(np.float32))
    critic = TargetImageCritic(img)
    assert critic.score(other).fitness == score_target_image(other, img).fitness
    assert critic.eval_size == (96, 96)


def test_histogram_critic():
    img = checkerboard(64)
    assert score_histogram(img, img).fitness == 1.0
    critic = HistogramCritic(img)
    assert critic.score(img).fitness == 1.0
    # a uniform gray image shares no mass with a black/white target
    assert critic.score(Canvas.filled(64, 64, (0.5, 0.5, 0.5))).fitness == 0.0


def cmds_with_strokes(n):
    return DrawCommandList(
        elements=np.zeros((n, EL_WIDTH)),
        stroke_bounds=np.arange(n + 1, dtype=np.int64),
        stroke_objects=np.arange(n, dtype=np.int64),
    )


def test_style_cost_modes():
    cmds = cmds_with_strokes(10)
    assert style_cost(cmds, "off", 5.0) == 0.0
    assert style_cost(cmds, "reward-fewer", 1.0, stroke_cap=100) == pytest.approx(-0.1)
    assert style_cost(cmds, "reward-more", 1.0, stroke_cap=100) == pytest.approx(0.1)
    assert style_cost(cmds, "reward-more", 2.0, stroke_cap=100) == -style_cost(
        cmds, "reward-fewer", 2.0, stroke_cap=100
    )
    with pytest.raises(ValueError):
        style_cost(cmds, "reward-fewer", -1.0)
    with pytest.raises(ValueError):
        style_cost(cmds, "sideways", 1.0)


def test_payload_prompt_case_sensitivity():
    img = Canvas.filled(8, 8)
    a = build_score_payload(img, "a tiger in the jungle")
    b = build_score_payload(img, "Jungle in the Tiger")
    c = build_score_payload(img, "A Tiger In The Jungle")
    assert a["image"] == b["image"] == c["image"]
    assert len({json.dumps(p, sort_keys=True) for p in (a, b, c)}) == 3


def test_payloads_identical_for_identical_inputs():
    img = Canvas.filled(8, 8, (0.2, 0.5, 0.8))
    a = build_score_payload(img, "same prompt")
    b = build_score_payload(img, "same prompt")
    assert json.dumps(a) == json.dumps(b)


def test_payload_resizes_to_declared_resolution():
    img = Canvas.filled(50, 50)
    payload = build_score_payload(img, "x", resolution=16)
    import base64
    import io

    from PIL import Image

    im = Image.open(io.BytesIO(base64.b64decode(payload["image"])))
    assert im.size == (16, 16)


class _StubHandler(BaseHTTPRequestHandler):
    fitness = 0.42
    status = 200
    body = None
    requests_seen = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        type(self).requests_seen.append((self.path, payload))
        if self.status != 200:
            self.send_response(self.status)
            self.end_headers()
            return
        reply = self.body if self.body is not None else {"fitness": self.fitness, "d": 512}
        data = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        data = json.dumps({"resolution": 32, "d": 512}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_service():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubHandler.fitness = 0.42
    _StubHandler.status = 200
    _StubHandler.body = None
    _StubHandler.requests_seen = []
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def test_score_external_passthrough(stub_service):
    img = Canvas.filled(16, 16)
    score = score_external(img, "a red circle", stub_service, resolution=16)
    assert isinstance(score, CriticScore)
    assert score.fitness == 0.42
    path, payload = _StubHandler.requests_seen[-1]
    assert path == "/score"
    assert payload["text"] == "a red circle"


def test_score_external_unreachable_raises_transport_error():
    img = Canvas.filled(8, 8)
    with pytest.raises(CriticTransportError):
        score_external(img, "x", "http://127.0.0.1:59999", timeout=0.2, retries=2, resolution=8)


def test_score_external_malformed_reply_is_protocol_error(stub_service):
    _StubHandler.body = {"unexpected": True}
    with pytest.raises(CriticProtocolError):
        score_external(Canvas.filled(8, 8), "x", stub_service, resolution=8)


def test_score_external_server_error_is_transport_error(stub_service):
    _StubHandler.status = 500
    with pytest.raises(CriticTransportError):
        score_external(Canvas.filled(8, 8), "x", stub_service, retries=2, resolution=8)


def test_external_critic_uses_health_resolution(stub_service):
    critic = ExternalCritic(stub_service, "prompt here")
    assert critic.eval_size == (32, 32)
    score = critic.score(Canvas.filled(32, 32))
    assert score.fitness == 0.42


def test_external_critic_defaults_resolution_when_service_down():
    critic = ExternalCritic("http://127.0.0.1:59998", "x", timeout=0.2, retries=1)
    assert critic.eval_size == (224, 224)
