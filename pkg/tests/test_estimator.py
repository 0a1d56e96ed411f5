import numpy as np
import pytest
from sklearn.base import clone
from sklearn.utils.estimator_checks import check_estimator

from clam import ClAM


def _blobs(seed=0, d=2):
    rng = np.random.default_rng(seed)
    centers = 3.0 * np.eye(3, d)
    return np.vstack([rng.normal(c, 0.3, size=(30, d)) for c in centers])


def test_sklearn_conformance():
    check_estimator(ClAM(n_clusters=3, max_epochs=2, n_restarts=1, batch_size=16))


def test_fit_predict_separated_blobs():
    # in 2-D a single visible coordinate cannot identify these blobs, so the
    # masked objective is tested where the observed part is informative
    X = _blobs(d=5)
    est = ClAM(n_clusters=3, beta=1.0, max_epochs=60, n_restarts=3, batch_size=10, mask_prob=0.2).fit(X)
    truth = np.repeat(np.arange(3), 30)
    from clam.metrics import ari
    assert ari(truth, est.labels_) == pytest.approx(1.0)
    np.testing.assert_array_equal(est.predict(X), est.labels_)
    assert est.transform(X).shape == (90, 3)
    assert est.cluster_centers_.shape == (3, 5)
    assert np.isfinite(est.score(X)) and est.score(X) <= 0


def test_clone_and_determinism():
    X = _blobs(1)
    a = ClAM(n_clusters=3, max_epochs=5, n_restarts=2, random_state=3).fit(X)
    b = clone(a).fit(X)
    np.testing.assert_array_equal(a.cluster_centers_, b.cluster_centers_)


def test_predict_checks_dimension():
    est = ClAM(n_clusters=2, max_epochs=2, n_restarts=1).fit(_blobs())
    with pytest.raises(ValueError):
        est.predict(np.zeros((3, 5)))
