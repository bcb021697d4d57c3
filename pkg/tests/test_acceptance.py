"""End-to-end acceptance gate.

One test per headline guarantee, each graded against an independent check:
the angle-scan minimizer, the composed-affine sampler oracle, straight-line
loop recomputations, brute-force ranking, an externally composed golden edit,
and byte-compare reruns of every CLI command.  Each test prints a single

    ACCEPTANCE <name>: PASS|FAIL

line (visible under ``pytest -s``) and fails loudly otherwise.
"""

import filecmp
import io
import json
import math
import os
import time
from contextlib import contextmanager, redirect_stderr, redirect_stdout

import numpy as np

from posedit import (
    EmbeddingVector,
    KeypointSet,
    LatentState,
    Mask,
    SpatialMap,
    blend_step,
    build_index,
    ddim_denoise_step,
    ddim_invert_step,
    linear_predictor,
    make_schedule,
    parse_attention_stack,
    parse_db_manifest,
    parse_metric_cases,
    parse_pose_video,
    query,
    residual,
    solve_similarity,
    threshold_mask,
    vid_acc,
)
from posedit.blending import CrossAttentionMap, run_blend_schedule_with_masks
from posedit.cli import main
from posedit.config import make_config
from posedit.metrics import gt_con, vid_con
from posedit.pipeline import run_edit, run_metrics
from conftest import fixture_path, read_fixture
from oracles import (
    best_similarity_by_scan,
    ddim_linear_final,
    grids_from_stack_doc,
    metric_aggregates_from_doc,
    ranking_by_sort,
    unroll_blend_schedule,
)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


# --- 1. similarity solve is the global optimum --------------------------------------


def random_alignment_case(seed):
    rng = np.random.default_rng(seed)
    moving = rng.uniform(-50.0, 50.0, size=(17, 2))
    s_true = float(rng.uniform(0.5, 3.0))
    theta_true = float(rng.uniform(-math.pi, math.pi))
    t_true = rng.uniform(-20.0, 20.0, size=2)
    c, s = math.cos(theta_true), math.sin(theta_true)
    rot = np.array([[c, -s], [s, c]])
    fixed = s_true * moving @ rot.T + t_true
    sigma = (0.0, 0.5, 2.0)[seed % 3]
    if sigma:
        fixed = fixed + rng.normal(0.0, sigma, size=(17, 2))
    mask = rng.random(17) < 0.85
    if mask.sum() < 3:
        mask[:3] = True
    return fixed, moving, mask, (s_true, theta_true, t_true, sigma)


def test_procrustes_optimality():
    with criterion("procrustes-optimality"):
        started = time.perf_counter()
        for seed in range(100):
            fixed, moving, mask, (s_true, theta_true, t_true, sigma) = (
                random_alignment_case(seed)
            )
            fset = KeypointSet(points=fixed, mask=mask)
            mset = KeypointSet(points=moving, mask=mask)
            tr = solve_similarity(fset, mset)
            assert tr.scale > 0.0
            got = residual(tr, fset, mset)
            best = best_similarity_by_scan(fixed, moving, mask)[3]
            assert got <= best + 1e-6, (
                f"seed {seed}: solver residual {got} exceeds scan optimum {best}"
            )
            if sigma == 0.0:
                assert abs(tr.scale - s_true) <= 1e-9
                assert abs(math.remainder(tr.theta - theta_true, math.tau)) <= 1e-9
                assert abs(tr.translation[0] - t_true[0]) <= 1e-9
                assert abs(tr.translation[1] - t_true[1]) <= 1e-9
                assert got < 1e-12
        elapsed = time.perf_counter() - started
        assert elapsed < 5.0, f"optimality sweep took {elapsed:.2f}s"


# --- 2. deterministic sampling is exactly invertible ---------------------------------


def test_ddim_exactness():
    with criterion("ddim-exactness"):
        sched = make_schedule()
        assert sched.steps == 50
        rng = np.random.default_rng(2024)
        dim = 8
        z0 = LatentState(values=rng.standard_normal(dim), t=0)
        matrix = 0.1 * rng.standard_normal((dim, dim))
        pred = linear_predictor(matrix)

        # invert to the top step, recording each step's noise vector
        z = z0
        noise = [None]
        for _ in range(sched.steps):
            eps = pred(z.values, z.t + 1, None)
            noise.append(eps)
            z = ddim_invert_step(z, eps, sched)
        assert z.t == sched.steps

        # replaying the record makes denoising the exact algebraic inverse
        back = z
        for t in range(sched.steps, 0, -1):
            back = ddim_denoise_step(back, noise[t], sched)
        assert back.t == 0
        assert float(np.max(np.abs(back.values - z0.values))) < 1e-6

        # a fresh linear-predictor denoise equals the composed-matrix closed form
        fresh = z
        for t in range(sched.steps, 0, -1):
            fresh = ddim_denoise_step(fresh, pred(fresh.values, t, None), sched)
        oracle = ddim_linear_final(matrix, z.values, sched.alphas, sched.steps)
        np.testing.assert_allclose(fresh.values, oracle, rtol=1e-9, atol=1e-12)

        # single-step inverse identities
        for seed in range(100):
            case = np.random.default_rng(5000 + seed)
            t = int(case.integers(1, sched.steps))
            zv = case.standard_normal(4)
            ev = case.standard_normal(4)
            down = ddim_denoise_step(LatentState(values=zv, t=t), ev, sched)
            up = ddim_invert_step(down, ev, sched)
            assert float(np.max(np.abs(up.values - zv))) < 1e-12
            up2 = ddim_invert_step(LatentState(values=zv, t=t - 1), ev, sched)
            down2 = ddim_denoise_step(up2, ev, sched)
            assert float(np.max(np.abs(down2.values - zv))) < 1e-12

        # each step is jointly linear in (latent, noise): 1000 scalar cases
        for i in range(1000):
            case = np.random.default_rng(6000 + i)
            t = int(case.integers(1, sched.steps + 1))
            zv = float(case.normal(0.0, 2.0))
            ev = float(case.normal(0.0, 2.0))
            lam = float(case.uniform(0.1, 4.0)) * (1 if i % 2 else -1)
            if i % 2:
                step = lambda z, e, at: ddim_denoise_step(
                    LatentState(values=[z], t=at), [e], sched
                )
            else:
                t -= 1
                step = lambda z, e, at: ddim_invert_step(
                    LatentState(values=[z], t=at), [e], sched
                )
            lhs = step(lam * zv, lam * ev, t).values[0]
            rhs = lam * step(zv, ev, t).values[0]
            assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs)) + 1e-18


# --- 3. attention blending -----------------------------------------------------------


def test_blending_correctness():
    with criterion("blending-correctness"):
        rng = np.random.default_rng(33)
        for _ in range(20):
            h, w = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            den = SpatialMap(h=h, w=w, values=rng.uniform(0.0, 9.0, (h, w)))
            inv = SpatialMap(h=h, w=w, values=rng.uniform(0.0, 9.0, (h, w)))
            ones = Mask(h=h, w=w, bits=np.ones((h, w), dtype=np.uint8))
            zeros = Mask(h=h, w=w, bits=np.zeros((h, w), dtype=np.uint8))
            mixed = Mask(h=h, w=w, bits=(rng.random((h, w)) < 0.5).astype(np.uint8))
            assert np.array_equal(blend_step(ones, den, inv).values, den.values)
            assert np.array_equal(blend_step(zeros, den, inv).values, inv.values)
            assert np.array_equal(blend_step(mixed, den, den).values, den.values)

        # the recorded 3-step schedule matches the loop unroll bit for bit
        text = read_fixture("blend", "blend_sched_01.json")
        stack = parse_attention_stack(text)
        records = grids_from_stack_doc(json.loads(text))
        for token_set in ((0,), (1,), (0, 1)):
            for ratio in (0.3, 0.62, 1.0):
                for union in (False, True):
                    got = run_blend_schedule_with_masks(stack, token_set, ratio, union)
                    want = unroll_blend_schedule(records, token_set, ratio, union)
                    assert len(got) == len(want) == 3
                    for (g_step, g_mask, g_edit), (w_step, w_bits, w_edit) in zip(
                        got, want
                    ):
                        assert g_step == w_step
                        assert np.array_equal(g_mask.bits, np.array(w_bits))
                        assert np.array_equal(g_edit.values, np.array(w_edit))

        # blended values never leave the interval spanned by the two inputs
        for i in range(1000):
            case = np.random.default_rng(7000 + i)
            h, w = int(case.integers(1, 7)), int(case.integers(1, 7))
            maps = tuple(
                SpatialMap(h=h, w=w, values=case.uniform(0.0, 5.0, (h, w)))
                for _ in range(2)
            )
            cross = CrossAttentionMap(maps=maps)
            ratio = float(case.uniform(0.05, 1.0))
            mask = threshold_mask(cross, (0, 1), ratio)
            den = SpatialMap(h=h, w=w, values=case.uniform(0.0, 5.0, (h, w)))
            inv = SpatialMap(h=h, w=w, values=case.uniform(0.0, 5.0, (h, w)))
            out = blend_step(mask, den, inv).values
            lo = np.minimum(den.values, inv.values)
            hi = np.maximum(den.values, inv.values)
            assert (out >= lo).all() and (out <= hi).all()


# --- 4. retrieval matches brute force -------------------------------------------------


def test_retrieval_equivalence():
    with criterion("retrieval-equivalence"):
        for i in range(50):
            rng = np.random.default_rng(4000 + i)
            n = int(rng.integers(1, 101))
            dim = int(rng.integers(2, 65))
            has_ties = i % 5 == 0
            if has_ties:
                n = max(n, 3)
            emb = rng.normal(0.0, 1.0, (n, dim))
            if has_ties:
                # doubling is exact in binary, so these three scores tie bitwise
                emb[1] = 2.0 * emb[0]
                emb[2] = 4.0 * emb[0]
            docs = [
                {
                    "entry_id": f"e{j:03d}",
                    "label": f"action {j}",
                    "pose_video_path": f"clips/e{j:03d}.json",
                    "embedding": [float(v) for v in emb[j]],
                }
                for j in range(n)
            ]
            db = build_index(parse_db_manifest(json.dumps(docs)))
            qv = [float(v) for v in rng.normal(0.0, 1.0, dim)]
            ranked = query(db, EmbeddingVector(values=qv), n)

            rows = [[float(v) for v in emb[j]] for j in range(n)]
            order, scores = ranking_by_sort(qv, rows, n)
            assert [eid for eid, _ in ranked] == [f"e{j:03d}" for j in order]
            assert [s for _, s in ranked] == [scores[j] for j in order]

            if has_ties:
                pos = {eid: at for at, (eid, _) in enumerate(ranked)}
                assert pos["e000"] + 1 == pos["e001"] == pos["e002"] - 1
                tied = {s for eid, s in ranked if eid in ("e000", "e001", "e002")}
                assert len(tied) == 1

            if i % 10 == 0:
                baseline = [eid for eid, _ in ranked]
                for k in range(10):
                    lam = float(np.random.default_rng(8000 + 10 * i + k).uniform(0.01, 100.0))
                    scaled = EmbeddingVector(values=[lam * v for v in qv])
                    assert [eid for eid, _ in query(db, scaled, n)] == baseline


# --- 5. end-to-end edits reproduce externally composed goldens ------------------------


def bundle_config(bundle, dest):
    base = fixture_path(bundle)
    return make_config(
        {
            "source": os.path.join(base, "source.json"),
            "detections": os.path.join(base, "detections.json"),
            "answer": os.path.join(base, "answer.txt"),
            "db": os.path.join(base, "db", "manifest.json"),
            "query_embedding": os.path.join(base, "query.json"),
            "out_dir": str(dest),
        }
    )


def test_pose_edit_goldens(tmp_path):
    with criterion("pose-edit-goldens"):
        for bundle in ("e2e_girl_dance", "e2e_boy_sit", "e2e_duo_wave"):
            dest = tmp_path / bundle
            report = run_edit(bundle_config(bundle, dest))
            with open(dest / "edited.json", encoding="utf-8") as fh:
                produced = fh.read()
            assert produced == read_fixture(bundle, "golden", "edited.json"), (
                f"{bundle}: edited video differs from its golden"
            )

            # instances the assignment left alone must survive untouched
            source = parse_pose_video(read_fixture(bundle, "source.json"))
            edited = parse_pose_video(produced)
            untouched = set(report["assignment"]["unmatched_instances"])
            assert len(source.frames) == len(edited.frames)
            for s_frame, e_frame in zip(source.frames, edited.frames):
                s_by_id = {p.instance_id: p for p in s_frame.instances}
                e_by_id = {p.instance_id: p for p in e_frame.instances}
                for inst_id in untouched:
                    assert e_by_id[inst_id] == s_by_id[inst_id]


# --- 6. metrics agree with straight-line recomputation --------------------------------


def resolved_metric_doc(name):
    doc = json.loads(read_fixture("metrics", name))
    for case in doc:
        for slot, node in list(case.items()):
            if isinstance(node, dict) and set(node) == {"path"}:
                case[slot] = json.loads(
                    read_fixture("metrics", *node["path"].split("/"))
                )
    return doc


def test_metrics_equivalence(tmp_path):
    with criterion("metrics-equivalence"):
        text = read_fixture("metrics", "manifest.json")
        base = fixture_path("metrics")

        def read_rel(path):
            with open(os.path.join(base, path), "r", encoding="utf-8") as fh:
                return fh.read()

        cases = parse_metric_cases(text, read_rel)
        assert len(cases) == 20
        acc = vid_acc(cases)
        con = sum(vid_con(c.edited, c.source) for c in cases) / len(cases)
        gts = [
            gt_con(c.edited, c.ground_truth)
            for c in cases
            if c.ground_truth is not None
        ]
        gt = sum(gts) / len(gts)

        want = metric_aggregates_from_doc(resolved_metric_doc("manifest.json"))
        assert abs(acc - want["vid_acc"]) <= 1e-9
        assert abs(con - want["vid_con"]) <= 1e-9
        assert abs(gt - want["gt_con"]) <= 1e-9

        report = run_metrics(
            make_config(
                {
                    "manifest": fixture_path("metrics", "manifest.json"),
                    "out_dir": str(tmp_path),
                }
            )
        )
        assert report["aggregates"]["vid_acc"] == round(want["vid_acc"], 6)
        assert report["aggregates"]["vid_con"] == round(want["vid_con"], 6)
        assert report["aggregates"]["gt_con"] == round(want["gt_con"], 6)

        tie = run_metrics(
            make_config(
                {
                    "manifest": fixture_path("metrics", "manifest_tie.json"),
                    "out_dir": str(tmp_path / "tie"),
                }
            )
        )
        assert tie["aggregates"]["vid_acc"] == 0.0


# --- 7. every command is byte-deterministic --------------------------------------------


def cli_fixture_commands():
    yield "align", [
        "align",
        fixture_path("align", "fixed.json"),
        fixture_path("align", "moving.json"),
    ]
    yield "retrieve", [
        "retrieve",
        "--db", fixture_path("retrieval", "db_manifest.json"),
        "--query-embedding", fixture_path("retrieval", "query.json"),
        "--top-k", "5",
    ]
    for bundle in ("e2e_girl_dance", "e2e_boy_sit", "e2e_duo_wave"):
        base = fixture_path(bundle)
        yield f"edit-{bundle}", [
            "edit",
            "--source", os.path.join(base, "source.json"),
            "--detections", os.path.join(base, "detections.json"),
            "--answer", os.path.join(base, "answer.txt"),
            "--db", os.path.join(base, "db", "manifest.json"),
            "--query-embedding", os.path.join(base, "query.json"),
        ]
    yield "blend-demo", [
        "blend-demo",
        "--config", fixture_path("blend", "config_tokens01.json"),
        "--stack", fixture_path("blend", "blend_sched_01.json"),
        "--blend-ratio", "0.62",
    ]
    yield "ddim-demo", ["ddim-demo"]
    for manifest in ("manifest.json", "manifest_tie.json", "manifest_no_gt.json"):
        yield f"metrics-{manifest}", [
            "metrics",
            "--manifest", fixture_path("metrics", manifest),
        ]


def test_cli_determinism(tmp_path):
    with criterion("cli-determinism"):
        started = time.perf_counter()
        for name, argv in cli_fixture_commands():
            out_dirs = []
            for attempt in ("first", "second"):
                dest = tmp_path / f"{name}-{attempt}"
                with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
                    code = main(argv + ["--out-dir", str(dest)])
                assert code == 0, f"{name} ({attempt} run) exited {code}"
                out_dirs.append(dest)
            first, second = out_dirs
            names = sorted(os.listdir(first))
            assert names == sorted(os.listdir(second)), f"{name}: file sets differ"
            match, mismatch, errors = filecmp.cmpfiles(
                first, second, names, shallow=False
            )
            assert not mismatch and not errors, (
                f"{name}: reruns differ on {mismatch or errors}"
            )
        elapsed = time.perf_counter() - started
        assert elapsed < 60.0, f"fixture sweep took {elapsed:.2f}s"
