import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from lance import Conv2D, LanceConfig, direct_conv, lance_faithful, lance_gemm
from lance.engines import DomainWeights
from lance.exceptions import InvalidArgumentError


@pytest.fixture
def data():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 6, 6, 3)).astype(np.float32)
    w = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
    return x, w


def test_get_params_roundtrip(data):
    _, w = data
    est = Conv2D(w, engine="lance-gemm", bits_w=6, granularity="position", pad=1)
    params = est.get_params()
    assert params["engine"] == "lance-gemm" and params["bits_w"] == 6
    cloned = clone(est)
    assert cloned.get_params()["pad"] == 1
    assert cloned.set_params(bits_i=4).bits_i == 4


def test_fit_caches_transformed_weights(data):
    x, w = data
    est = Conv2D(w, pad=1).fit(x)
    assert isinstance(est.weights_, DomainWeights)
    assert (est.n_filters_, est.n_channels_) == (4, 3)
    np.testing.assert_array_equal(est.transform(x), lance_faithful(x, w, pad=1, cfg=LanceConfig()))


def test_gemm_engine(data):
    x, w = data
    est = Conv2D(w, engine="lance-gemm", granularity="tensor").fit()
    cfg = LanceConfig(8, 8, "tensor", "gemm")
    np.testing.assert_array_equal(est.transform(x), lance_gemm(x, w, cfg=cfg))


@pytest.mark.parametrize("engine", ["direct", "winograd", "quantized-direct"])
def test_other_engines_close_to_direct(data, engine):
    x, w = data
    y = Conv2D(w, engine=engine, pad=1).fit_transform(x)
    ref = direct_conv(x, w, pad=1)
    assert np.linalg.norm(y - ref) / np.linalg.norm(ref) <= 5e-2


def test_output_shape(data):
    x, w = data
    est = Conv2D(w, engine="direct").fit(x)
    assert est.output_shape(x.shape) == est.transform(x).shape == (2, 4, 4, 4)


def test_transform_before_fit(data):
    x, w = data
    with pytest.raises(NotFittedError):
        Conv2D(w).transform(x)


@pytest.mark.parametrize(
    "params",
    [
        dict(engine="fft"),
        dict(pad=3),
        dict(bits_w=12),
        dict(engine="lance-gemm", granularity="tile"),
        dict(filters=None),
    ],
)
def test_invalid_params_raise_at_fit(data, params):
    _, w = data
    kwargs = dict(filters=w)
    kwargs.update(params)
    with pytest.raises(InvalidArgumentError):
        Conv2D(**kwargs).fit()


def test_channel_mismatch_at_fit(data):
    x, w = data
    with pytest.raises(InvalidArgumentError):
        Conv2D(w).fit(x[..., :2])


def test_composes_in_pipeline(data):
    x, w = data
    relu = FunctionTransformer(lambda y: np.maximum(y, 0))
    pipe = make_pipeline(Conv2D(w, engine="winograd", pad=1), relu).fit(x)
    out = pipe.transform(x)
    np.testing.assert_allclose(out, np.maximum(direct_conv(x, w, pad=1), 0), rtol=1e-5, atol=1e-5)
