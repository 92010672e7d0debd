"""CTG-shaped synthetic data for tests that cannot rely on the real file."""
import numpy as np

from fetalctg.dataset import Dataset, write_csv

# class proportions of the public file (1655 / 295 / 176 of 2126)
PROPORTIONS = (1655 / 2126, 295 / 2126, 176 / 2126)
BASE = np.array([133, 0.003, 0.009, 0.004, 0.002, 0.0, 0.0002, 47, 1.3, 10, 8.2,
                 70, 93, 164, 4, 0.3, 137, 134, 138, 18, 0.3])
SCALE = np.array([10, 0.004, 0.04, 0.003, 0.003, 0.0001, 0.0006, 17, 0.9, 18, 5.6,
                  39, 29, 18, 3, 0.7, 16, 15, 14, 29, 0.6])


def make_ctg_like(n=600, seed=0, separation=1.0) -> Dataset:
    rng = np.random.default_rng(seed)
    counts = np.floor(np.array(PROPORTIONS) * n).astype(int)
    counts[0] += n - counts.sum()
    mix = rng.normal(size=(21, 21)) / np.sqrt(21)
    shifts = separation * rng.normal(size=(3, 21)) * np.array([[0.0], [1.2], [1.6]])
    rows, labels = [], []
    for c, k in enumerate(counts):
        latent = rng.normal(size=(k, 21)) @ (np.eye(21) * 0.7 + 0.3 * mix) + shifts[c]
        rows.append(BASE + SCALE * latent)
        labels += [c + 1] * k
    x = np.round(np.vstack(rows), 4)
    return Dataset(x, np.array(labels))


def write_ctg_like(path, **kwargs) -> Dataset:
    d = make_ctg_like(**kwargs)
    write_csv(d, path)
    return d
