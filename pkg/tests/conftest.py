import numpy as np
import pytest


def batch_mcse(chain: np.ndarray, n_batches: int = 25) -> float:
    """Batch-means standard error of a (possibly autocorrelated) chain mean."""
    chain = np.asarray(chain, dtype=float)
    usable = (len(chain) // n_batches) * n_batches
    batches = chain[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(batches.std(ddof=1) / np.sqrt(n_batches))


@pytest.fixture(scope="session")
def diabetes():
    from bayescp.datasets import builtin_dataset

    return builtin_dataset("diabetes")


@pytest.fixture(scope="session")
def breast_cancer():
    from bayescp.datasets import builtin_dataset

    return builtin_dataset("breast_cancer")
