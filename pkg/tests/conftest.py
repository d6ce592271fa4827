import numpy as np
import pytest

from attnlab.numeric.rng import RandomSource


@pytest.fixture
def rng():
    return RandomSource(12345)


def brute_sqdist(x):
    n = len(x)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = sum((x[i, k] - x[j, k]) ** 2 for k in range(x.shape[1]))
    return out


def tiny_ipn(kind, seed=0, n=6, width=4):
    """Two-block IPN on n tokens with every trainable weight nonzero."""
    from attnlab.attention import build_ipn
    from attnlab.numeric.rng import RandomSource

    model = build_ipn(kind, 2, width, 2, n_blocks=2, eps=0.5, seed=seed, qk_dim=3, mlp_width=5)
    r = RandomSource(seed).derive("tiny")
    for name, p in model.named_params().items():
        if p.requires_grad and not p.value.any():
            p.value[...] = r.derive(name).normal_matrix(*p.shape, 0.5)
    x = r.derive("x").normal_matrix(n, 2)
    y = (np.arange(n) % 2).astype(np.int64)
    return model, x, y


# acceptance summary: tests marked @pytest.mark.acceptance(n, "title") are
# collected per criterion and reported as one PASS/FAIL line each

_ACCEPTANCE: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, title = mark.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "ok": True, "ran": False})
    if rep.when == "call":
        entry["ran"] = True
    if rep.failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        verdict = "PASS" if e["ok"] and e["ran"] else ("FAIL" if not e["ok"] else "SKIP")
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {e['title']}")
