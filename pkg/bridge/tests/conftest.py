import numpy as np
import pytest
import torch


class _Encoder(torch.nn.Module):
    """Stand-in embedding encoder with the real models' I/O contract."""

    def __init__(self, input_len: int, output_dim: int):
        super().__init__()
        self.linear = torch.nn.Linear(input_len, output_dim)

    def forward(self, x):
        return self.linear(x)


class _AgeModel(torch.nn.Module):
    """Stand-in age model: (batch, 100) template -> (prediction, activation)."""

    def __init__(self):
        super().__init__()
        self.body = torch.nn.Linear(100, 192)
        self.head = torch.nn.Linear(192, 1)

    def forward(self, t):
        act = torch.tanh(self.body(t))
        pred = self.head(act).squeeze(-1) + 50.0
        return pred, act


def _save_scripted(module, path):
    torch.manual_seed(0)
    scripted = torch.jit.script(module)
    scripted.save(str(path))
    return path


@pytest.fixture(scope="session")
def pulse_ppg_weights(tmp_path_factory):
    torch.manual_seed(11)
    return _save_scripted(
        _Encoder(500, 512), tmp_path_factory.mktemp("w") / "pulse_ppg.pt"
    )


@pytest.fixture(scope="session")
def papagei_weights(tmp_path_factory):
    torch.manual_seed(12)
    return _save_scripted(
        _Encoder(1250, 512), tmp_path_factory.mktemp("w") / "papagei_s.pt"
    )


@pytest.fixture(scope="session")
def age_weights(tmp_path_factory):
    torch.manual_seed(13)
    return _save_scripted(_AgeModel(), tmp_path_factory.mktemp("w") / "age.pt")


@pytest.fixture(scope="session")
def synth_data(tmp_path_factory):
    """A small population written by the benchmark toolkit's generator."""
    from ppgbench.synth import SynthSpec, synth_population

    out = tmp_path_factory.mktemp("synth") / "data"
    synth_population(SynthSpec(n_subjects=8, seed=17), out)
    # the generator's own embeddings are not part of the bridge contract
    for stray in out.glob("*.ppge"):
        stray.unlink()
    return out


@pytest.fixture()
def rng():
    return np.random.default_rng(19)
