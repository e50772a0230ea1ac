"""Command-line entrypoint wiring every module.

Subcommands: synth scene | synth mission | sim run | train | segment |
estimate | evaluate | label serve. All randomness flows from config-declared
seeds so re-running any command reproduces its outputs byte for byte.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import dataset as ds
from .errors import PengaugeError
from .fouling import EstimateConfig, FrameInput, estimate_mission
from .imaging import read_image, write_binary_mask, write_image, write_labeled_mask
from .rovsim import run_mission
from .segmentation import (
    load_classifier,
    predict_mask,
    save_classifier,
    split_dataset,
    train_pixel_classifier,
)
from .synthscene import render_mission, render_scene, training_label_mask

TRAJECTORY_HEADER = "t,x_true,y_true,z_true,x_meas,y_meas,z_meas,state,u_x,u_z,capture_flag"
TRUTH_HEADER = "frame_id\tdistance\tachieved_coverage\tcenter_count"


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(samples, path) -> None:
    lines = [TRAJECTORY_HEADER]
    for s in samples:
        tp, mp = s.true_position, s.measured_position
        lines.append(
            ",".join(
                [_fmt(s.t), _fmt(tp[0]), _fmt(tp[1]), _fmt(tp[2]), _fmt(mp[0]), _fmt(mp[1]), _fmt(mp[2]),
                 s.state.value, _fmt(s.u_x), _fmt(s.u_z), "1" if s.capture else "0"]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trajectory_csv(path):
    """Returns (times, true positions (n,3), capture times)."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise PengaugeError("missing-file", str(path))
    if not lines or lines[0] != TRAJECTORY_HEADER:
        raise PengaugeError("corrupt-file", f"{path}: bad trajectory header")
    times, positions, captures = [], [], []
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split(",")
        times.append(float(parts[0]))
        positions.append([float(parts[1]), float(parts[2]), float(parts[3])])
        if parts[10] == "1":
            captures.append(float(parts[0]))
    return np.array(times), np.array(positions), np.array(captures)


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_synth_scene(args) -> int:
    cfg = cfgmod.load_config(args.config, args.set)
    spec = cfgmod.scene_from(cfg)
    out = Path(args.out)
    truth_rows = []
    for k in range(args.count):
        scene_spec = spec if args.count == 1 else _reseed(spec, spec.seed + k)
        truth = render_scene(scene_spec)
        fid = f"{args.prefix}{k:04d}"
        if args.labeled:
            mask = training_label_mask(truth, scene_spec.degradation.blur_sigma_px)
            from .clustering import export_example

            export_example(truth.frame, mask, out, fid, year=0, location="synthetic",
                           crop=f"0,0,{truth.frame.width},{truth.frame.height}")
        else:
            write_image(truth.frame, ds.frame_path(out, fid))
            write_binary_mask(truth.net_mask, ds.mask_path(out, fid))
        truth_rows.append((fid, truth.distance, truth.achieved_coverage, len(truth.centers)))
    _write_truth(out / "truth.tsv", truth_rows)
    _write_json(
        {"kind": "scene", "labeled": bool(args.labeled), "count": args.count,
         "target_coverage": spec.target_coverage, "seed": spec.seed, "distance": spec.distance},
        out / "meta.json",
    )
    print(f"wrote {args.count} scene(s) to {out}")
    return 0


def _reseed(spec, seed):
    from dataclasses import replace

    return replace(spec, seed=seed)


def _write_truth(path, rows) -> None:
    lines = [TRUTH_HEADER]
    for fid, dist, cov, n in rows:
        lines.append(f"{fid}\t{_fmt(dist)}\t{_fmt(cov)}\t{n}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_sim(cfg, seed):
    plan = cfgmod.plan_from(cfg)
    result = run_mission(
        plan,
        gains=cfgmod.gains_from(cfg),
        sim=cfgmod.sim_from(cfg),
        sensors=cfgmod.sensors_from(cfg),
        seed=seed,
    )
    return plan, result


def cmd_synth_mission(args) -> int:
    cfg = cfgmod.load_config(args.config, args.set)
    spec = cfgmod.scene_from(cfg)
    if spec.net_width is None or spec.net_height is None:
        raise PengaugeError("missing-key", "scene.net_width and scene.net_height are required for missions")
    plan, result = _run_sim(cfg, cfgmod.get_int(cfg, "sim.seed"))
    if not result.completed:
        raise PengaugeError("mission-failed", f"simulation timed out after {result.duration:.0f} s")
    out = Path(args.out)
    captures = [(c.t, c.position, c.velocity) for c in result.captures]
    scene = render_mission(spec, captures)
    truth_rows = []
    for mf in scene.frames:
        write_image(mf.truth.frame, ds.frame_path(out, mf.frame_id))
        write_binary_mask(mf.truth.net_mask, ds.mask_path(out, mf.frame_id))
        truth_rows.append((mf.frame_id, mf.truth.distance, mf.truth.achieved_coverage, len(mf.truth.centers)))
    _write_truth(out / "truth.tsv", truth_rows)
    write_trajectory_csv(result.samples, out / "trajectory.csv")
    _write_json(
        {
            "kind": "mission",
            "target_coverage": spec.target_coverage,
            "achieved_coverage": scene.achieved_coverage,
            "seed": spec.seed,
            "sim_seed": cfgmod.get_int(cfg, "sim.seed"),
            "net_width": scene.net_width,
            "net_height": scene.net_height,
            "standoff": plan.standoff,
            "frames": len(scene.frames),
            "off_net_frames": sum(1 for f in scene.frames if f.off_net),
            "duration_s": result.duration,
        },
        out / "meta.json",
    )
    print(f"mission: {len(scene.frames)} frames, achieved coverage {scene.achieved_coverage:.4f}, wrote {out}")
    return 0


def cmd_sim_run(args) -> int:
    cfg = cfgmod.load_config(args.config, args.set)
    plan, result = _run_sim(cfg, cfgmod.get_int(cfg, "sim.seed"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(result.samples, out / "trajectory.csv")
    lines = ["x,y,z"]
    start = result.samples[0].true_position
    lines.append(f"{_fmt(start[0])},{_fmt(start[1])},{_fmt(start[2])}")
    for wp in result.waypoints:
        lines.append(f"{_fmt(wp.x)},{_fmt(wp.y)},{_fmt(wp.z)}")
    (out / "ideal_track.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(
        {"completed": result.completed, "duration_s": result.duration, "captures": len(result.captures),
         "reason": result.reason},
        out / "sim.json",
    )
    if not result.completed:
        raise PengaugeError("mission-failed", f"timed out after {result.duration:.0f} s (partial log written)")
    print(f"mission complete in {result.duration:.0f} s ({len(result.captures)} captures), wrote {out}")
    return 0


def _load_labeled_entries(dataset_dir):
    from .imaging import read_labeled_mask

    entries = ds.read_index(dataset_dir)
    if not entries:
        raise PengaugeError("missing-file", f"{dataset_dir}: no index.tsv entries")
    pairs = []
    for e in entries:
        img = read_image(ds.frame_path(dataset_dir, e.entry_id))
        mask = read_labeled_mask(ds.mask_path(dataset_dir, e.entry_id))
        pairs.append((img, mask))
    return pairs


def cmd_train(args) -> int:
    cfg = cfgmod.load_config(args.config, args.set)
    pairs = _load_labeled_entries(args.dataset)
    train, test = split_dataset(pairs, ratio=cfgmod.get_float(cfg, "train.split_ratio"),
                                seed=cfgmod.get_int(cfg, "train.seed"))
    clf, report = train_pixel_classifier(
        train,
        test,
        colorspace=cfgmod.get_str(cfg, "train.colorspace"),
        epochs=cfgmod.get_int(cfg, "train.epochs"),
        learning_rate=cfgmod.get_float(cfg, "train.learning_rate"),
        threshold=cfgmod.get_float(cfg, "train.threshold"),
        seed=cfgmod.get_int(cfg, "train.seed"),
    )
    save_classifier(clf, args.out)
    if args.report:
        _write_json(
            {
                "train_pixels": report.train_pixels,
                "test_pixels": report.test_pixels,
                "test_accuracy": report.test_accuracy,
                "test_dice": report.test_dice,
                "epochs": report.epochs,
                "final_loss": report.final_loss,
            },
            args.report,
        )
    print(f"trained on {report.train_pixels} px; test accuracy {report.test_accuracy:.4f}, dice {report.test_dice:.4f}")
    return 0


def cmd_segment(args) -> int:
    frames_dir = Path(args.frames)
    ids = sorted(p.stem for p in frames_dir.glob("*.png"))
    if not ids:
        raise PengaugeError("missing-file", f"no frames in {frames_dir}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.external_masks:
        from .segmentation import ingest_external_mask

        for fid in ids:
            img = read_image(frames_dir / f"{fid}.png")
            mask = ingest_external_mask(Path(args.external_masks) / f"{fid}.png", (img.width, img.height))
            write_binary_mask(mask, out / f"{fid}.png")
    else:
        if not args.classifier:
            raise PengaugeError("missing-key", "need --classifier or --external-masks")
        clf = load_classifier(args.classifier)
        for fid in ids:
            img = read_image(frames_dir / f"{fid}.png")
            write_binary_mask(predict_mask(clf, img), out / f"{fid}.png")
    print(f"wrote {len(ids)} masks to {out}")
    return 0


def _mission_frames(mission_dir, mask_dir=None):
    """FrameInputs for a mission directory, timestamped from the trajectory log."""
    mission = Path(mission_dir)
    frames_dir = mission / "frames"
    ids = sorted(p.stem for p in frames_dir.glob("*.png"))
    if not ids:
        raise PengaugeError("missing-file", f"no frames in {frames_dir}")
    times, positions, capture_times = read_trajectory_csv(mission / "trajectory.csv")
    if len(capture_times) != len(ids):
        raise PengaugeError(
            "frame-count-mismatch", f"{len(ids)} frames but {len(capture_times)} capture events in the log"
        )
    inputs = []
    for fid, t in zip(ids, capture_times):
        if mask_dir is not None:
            from .segmentation import ingest_external_mask

            img = read_image(frames_dir / f"{fid}.png")
            mask = ingest_external_mask(Path(mask_dir) / f"{fid}.png", (img.width, img.height))
            inputs.append(FrameInput(fid, float(t), mask=mask))
        else:
            inputs.append(FrameInput(fid, float(t), image=read_image(frames_dir / f"{fid}.png")))
    return inputs, (times, positions)


def cmd_estimate(args) -> int:
    cfg = cfgmod.load_config(args.config, args.set)
    use_contour = True
    use_movement = True
    if args.no_filters:
        use_contour = use_movement = False
    elif args.contour_filter or args.movement_filter:
        use_contour = args.contour_filter
        use_movement = args.movement_filter

    classifier = load_classifier(args.classifier) if args.classifier else None
    if classifier is None and not args.external_masks:
        raise PengaugeError("missing-key", "need --classifier or --external-masks")
    frames, trajectory = _mission_frames(args.mission, mask_dir=args.external_masks)

    est_cfg = EstimateConfig(
        net=cfgmod.net_from(cfg),
        cam=cfgmod.camera_from(cfg),
        classifier=classifier,
        use_contour_filter=use_contour,
        use_movement_filter=use_movement,
        fixed_distance=args.fixed_distance,
        mask_source="external" if args.external_masks else "classifier",
    )
    report = estimate_mission(frames, est_cfg, trajectory)

    out = Path(args.out)
    _write_json(report.to_dict(), out)
    csv_path = out.with_suffix(".csv")
    lines = ["frame_id,t,fouling_fraction,distance_m,accepted,reason"]
    for f in report.frames:
        frac = "" if f.fouling_fraction is None else _fmt(f.fouling_fraction)
        dist = "" if f.distance_est is None else _fmt(f.distance_est)
        lines.append(f"{f.frame_id},{_fmt(f.t)},{frac},{dist},{int(f.accepted)},{f.reason}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    out.with_suffix(".txt").write_text(report.to_table() + "\n", encoding="utf-8")
    print(f"mean fouling {report.mean_fouling:.4f} over {report.frames_accepted}/{report.frames_total} frames -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    rows = []
    for mission_dir in args.missions:
        mission = Path(mission_dir)
        meta = json.loads((mission / "meta.json").read_text(encoding="utf-8"))
        report_path = mission / args.report_name
        if not report_path.exists():
            raise PengaugeError("missing-file", str(report_path))
        report = json.loads(report_path.read_text(encoding="utf-8"))
        actual = meta["achieved_coverage"]
        estimated = report["summary"]["mean_fouling"]
        rows.append((mission.name, actual, estimated, abs(estimated - actual)))
    lines = ["scenario,actual,estimated,abs_error"]
    for name, actual, est, err in rows:
        lines.append(f"{name},{_fmt(actual)},{_fmt(est)},{_fmt(err)}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    mean_err = float(np.mean([r[3] for r in rows]))
    for name, actual, est, err in rows:
        print(f"{name}: actual {actual:.4f} estimated {est:.4f} abs error {err * 100:.2f} pts")
    print(f"mean abs error: {mean_err * 100:.2f} pts")
    return 0


def cmd_label_export(args) -> int:
    """Headless twin of the server's export: cluster, assign, write the pair."""
    from .clustering import export_example, kmeans, legend_from_model, legend_to_mask
    from .imaging import CLASS_IDS, center_crop, rgb_to_lab, write_labeled_mask

    cfg = cfgmod.load_config(args.config, args.set)
    crop_fraction = cfgmod.get_float(cfg, "label.crop_fraction")
    img = read_image(ds.frame_path(args.dataset, args.image))
    crop = center_crop(img, crop_fraction)
    source = rgb_to_lab(crop) if args.colorspace == "lab" else crop
    model = kmeans(source, k=args.k, seed=args.seed)
    legend = legend_from_model(model)
    for item in args.assign:
        index, _, name = item.partition("=")
        if name not in CLASS_IDS:
            raise PengaugeError("bad-class", f"unknown class {name!r}")
        legend.set_class(int(index), CLASS_IDS[name])
    for index in args.disable:
        legend.set_enabled(int(index), False)
    mask = legend_to_mask(model, legend)
    mask_path = ds.mask_path(args.dataset, args.image)
    already = {e.entry_id for e in ds.read_index(args.dataset)}
    if args.image in already:
        write_labeled_mask(mask, mask_path)
    else:
        x0 = int(img.width * (1 - crop_fraction)) // 2
        y0 = int(img.height * (1 - crop_fraction)) // 2
        export_example(crop, mask, args.dataset, args.image, year=0, location="labeler",
                       crop=f"{x0},{y0},{crop.width},{crop.height}")
    print(f"wrote {mask_path}")
    return 0


def cmd_label_serve(args) -> int:
    import uvicorn

    from .label_server import create_app

    cfg = cfgmod.load_config(args.config, args.set)
    port = args.port or cfgmod.get_int(cfg, "label.port")
    app = create_app(
        args.dataset,
        static_dir=args.static,
        crop_fraction=cfgmod.get_float(cfg, "label.crop_fraction"),
    )
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pengauge", description="Fish-pen inspection toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="key=value config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")

    synth = sub.add_parser("synth", help="generate synthetic ground-truth data")
    synth_sub = synth.add_subparsers(dest="synth_command", required=True)
    sc = synth_sub.add_parser("scene", help="render standalone ground-truth scenes")
    common(sc)
    sc.add_argument("--out", required=True)
    sc.add_argument("--count", type=int, default=1)
    sc.add_argument("--prefix", default="s", help="frame id prefix (ids are <prefix>0000..)")
    sc.add_argument("--labeled", action="store_true", help="export class-labeled masks for training")
    sc.set_defaults(func=cmd_synth_scene)
    sm = synth_sub.add_parser("mission", help="simulate a mission and render its frames")
    common(sm)
    sm.add_argument("--out", required=True)
    sm.set_defaults(func=cmd_synth_mission)

    sim = sub.add_parser("sim", help="control-loop simulation")
    sim_sub = sim.add_subparsers(dest="sim_command", required=True)
    sr = sim_sub.add_parser("run", help="run a mission, log the trajectory")
    common(sr)
    sr.add_argument("--out", required=True)
    sr.set_defaults(func=cmd_sim_run)

    tr = sub.add_parser("train", help="train the pixel classifier on a labeled dataset")
    common(tr)
    tr.add_argument("--dataset", required=True)
    tr.add_argument("--out", required=True, help="classifier file to write")
    tr.add_argument("--report", default=None, help="training report JSON")
    tr.set_defaults(func=cmd_train)

    sg = sub.add_parser("segment", help="write binary masks for a frame directory")
    common(sg)
    sg.add_argument("--frames", required=True)
    sg.add_argument("--classifier", default=None)
    sg.add_argument("--external-masks", default=None, help="ingest pre-made masks instead of classifying")
    sg.add_argument("--out", required=True)
    sg.set_defaults(func=cmd_segment)

    es = sub.add_parser("estimate", help="full biofouling estimate over a mission directory")
    common(es)
    es.add_argument("--mission", required=True)
    es.add_argument("--classifier", default=None)
    es.add_argument("--external-masks", default=None)
    es.add_argument("--no-filters", action="store_true", help="benchmark mode: no footage filters")
    es.add_argument("--contour-filter", action="store_true", help="enable only the contour filter")
    es.add_argument("--movement-filter", action="store_true", help="enable only the movement filter")
    es.add_argument("--fixed-distance", type=float, default=None, metavar="M")
    es.add_argument("--out", required=True, help="report JSON path")
    es.set_defaults(func=cmd_estimate)

    ev = sub.add_parser("evaluate", help="compare mission reports against ground truth")
    ev.add_argument("--missions", nargs="+", required=True)
    ev.add_argument("--report-name", default="report.json")
    ev.add_argument("--out", required=True, help="error table CSV")
    ev.set_defaults(func=cmd_evaluate)

    lb = sub.add_parser("label", help="labeling service")
    lb_sub = lb.add_subparsers(dest="label_command", required=True)
    ls = lb_sub.add_parser("serve", help="start the labeling HTTP server")
    common(ls)
    ls.add_argument("--dataset", required=True)
    ls.add_argument("--port", type=int, default=None)
    ls.add_argument("--host", default="127.0.0.1")
    ls.add_argument("--static", default=None, help="directory of UI static files")
    ls.set_defaults(func=cmd_label_serve)
    le = lb_sub.add_parser("export", help="cluster, assign classes, and export without the UI")
    common(le)
    le.add_argument("--dataset", required=True)
    le.add_argument("--image", required=True, help="frame id to label")
    le.add_argument("--k", type=int, default=8)
    le.add_argument("--colorspace", choices=("rgb", "lab"), default="lab")
    le.add_argument("--seed", type=int, default=0)
    le.add_argument("--assign", action="append", default=[], metavar="INDEX=CLASS")
    le.add_argument("--disable", action="append", default=[], metavar="INDEX")
    le.set_defaults(func=cmd_label_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PengaugeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
