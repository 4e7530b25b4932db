import numpy as np
import pytest

from gmtl.inference import ScoreTable
from gmtl.priors import estimate_prior, pair_counts
from gmtl.synthetic import MixtureSpec, oracle_scores


@pytest.fixture(scope="session")
def synthetic_scores():
    """Oracle scores for 5000 draws of the default mixture with cov = 0.2."""
    data, table = oracle_scores(MixtureSpec.standard(0.2), 5000, 123)
    prior = estimate_prior(pair_counts(data.y, data.y_prime, (2, 2)), 1.0)
    return table, prior


def peaked_table(label_main, label_aux, k_main=2, k_aux=2, mass=1 - 1e-9):
    """Scores that put almost all posterior mass on the true labels."""
    n = len(label_main)

    def peaked(labels, k):
        p = np.full((n, k), (1 - mass) / (k - 1))
        p[np.arange(n), labels] = mass
        return np.log(p)

    return ScoreTable(tuple(f"p{i}" for i in range(n)), peaked(label_main, k_main),
                      peaked(label_aux, k_aux), label_main, label_aux)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
