import numpy as np
import pytest


def make_ecg(beat_times, fs, duration_s, r_amp=1.0, t_amp=0.2, s_frac=0.3):
    """Synthetic ECG: Gaussian QRS with an S dip and a T bump per beat."""
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    ecg = np.zeros(n)
    for bt in np.atleast_1d(beat_times):
        ecg += r_amp * np.exp(-0.5 * ((t - bt) / 0.012) ** 2)
        ecg -= s_frac * r_amp * np.exp(-0.5 * ((t - bt - 0.030) / 0.014) ** 2)
        ecg += t_amp * r_amp * np.exp(-0.5 * ((t - bt - 0.250) / 0.060) ** 2)
    return ecg


@pytest.fixture
def ecg_train():
    return make_ecg
