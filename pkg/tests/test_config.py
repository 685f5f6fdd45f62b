import pytest

from thermokac import config
from thermokac.core import ConfigError


def test_defaults():
    s = config.load()
    assert s.sim.n_particles == 256
    assert len(s.sim.sample_times) == 11 and s.sim.sample_times[-1] == 1.0
    assert s.process == "quenched" and s.sim.project_to_sphere is None
    assert s.sweep_n == (32, 128, 512, 2048)


def test_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nn_particles = 64  # inline\nsample_times=0,0.5\nt_final=0.5\nproject_to_sphere=false\n")
    s = config.load(p, {"n_particles": "128"})
    assert s.sim.n_particles == 128
    assert s.sim.sample_times == (0.0, 0.5)
    assert s.sim.project_to_sphere is False
    assert "n_particles=128\n" in s.echo()


@pytest.mark.parametrize(
    "text,key",
    [
        ("colour=red", "colour"),
        ("n_particles=lots", "n_particles"),
        ("snapshots=maybe", "snapshots"),
        ("process=coupled", "process"),
        ("phi=exp", "phi"),
        ("sweep_n=64,32", "sweep_n"),
        ("sample_times=0.5,0.2", "sample_times"),
        ("initial_distribution=gaussian:0:-2", "initial_distribution"),
    ],
)
def test_errors_name_the_key(tmp_path, text, key):
    p = tmp_path / "bad.cfg"
    p.write_text(text + "\n")
    with pytest.raises(ConfigError) as info:
        config.load(p)
    assert info.value.key == key


def test_malformed_line():
    with pytest.raises(ConfigError):
        config.parse_lines("just words\n")


def test_with_n_keeps_everything_else():
    s = config.load(overrides={"replicas": "7"})
    t = s.with_n(99)
    assert t.sim.n_particles == 99 and t.sim.replicas == 7
