"""Smoke test for the viaplan_py extension.

Build the extension first:

    cargo build --release -p viaplan-py

then run `python3 python/smoke_test.py [ARTIFACT_DIR]`. With an artifact
directory (as written by `viaplan pipeline`), the trained models are loaded
and a short evaluation is run as well.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_extension():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libviaplan_py.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("viaplan_py", str(lib))
            spec = importlib.util.spec_from_file_location("viaplan_py", lib, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("libviaplan_py.so not found; run `cargo build --release -p viaplan-py`")


def check_schedule(vp):
    betas, alphas, abars = vp.noise_schedule(20)
    assert len(betas) == len(alphas) == len(abars) == 21
    for i in range(1, 21):
        assert math.isclose(abars[i], abars[i - 1] * alphas[i], rel_tol=1e-12)
        assert abars[i] < abars[i - 1]
    print(f"schedule ok: alpha_bar[20] = {abars[20]:.3e}")


def check_environment(vp):
    traj = vp.procedural_trajectory(7)
    assert len(traj) == 50
    assert {leg for *_, leg in traj} == {"Left", "Right"}

    scenario = vp.Scenario("platform", level=0.3)
    ep = scenario.build(11)
    assert ep.alive and ep.status == "running"
    assert len(ep.conditioning()) > 0
    assert all(math.isfinite(v) for v in ep.vf_state("platform"))
    reward, terminated, _ = ep.step([0.6, 0.0, 0.0])
    assert reward in (0.0, 1.0) and terminated == (reward == 0.0)
    print(f"environment ok: {ep.steps} step(s), stance {[round(v, 3) for v in ep.stance]}")

    try:
        vp.Scenario("nowhere")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown task should raise ValueError")


def check_compose(vp):
    scores = vp.compose_scores([[0.5, 2.0, 1.0], [2.0, 0.25, 3.0]])
    assert scores == [1.0, 0.5, 3.0]
    print("compose ok")


def check_artifacts(vp, directory):
    art = vp.Artifacts.load(directory)
    ep = vp.Scenario("obstacle", level=1.0).build(3)
    plan, score = art.plan_step(ep, "vf-online", seed=5, samples=16)
    assert len(plan) == 12 and score is not None
    den = vp.Denoiser.load(str(pathlib.Path(directory) / "diffusion"))
    plans = den.sample_plans(ep.conditioning(), 4, seed=9)
    assert len(plans) == 4 and all(len(p) == 12 for p in plans)
    vf = vp.ValueNet.load(str(pathlib.Path(directory) / "vf_online_obstacle"), "obstacle")
    q = vf.eval_many(ep.vf_state("obstacle"), plans)
    assert all(0.0 <= v <= vf.q_max for v in q)
    row = art.evaluate("vf-online", vp.Scenario("platform", level=0.3), trials=1, episodes=4, samples=16)
    print(f"artifacts ok: plan score {score:.3f}, platform success {row['mean_success']:.2f}")


def main():
    vp = load_extension()
    check_schedule(vp)
    check_environment(vp)
    check_compose(vp)
    if len(sys.argv) > 1:
        check_artifacts(vp, sys.argv[1])
    print("smoke test passed")


if __name__ == "__main__":
    main()
