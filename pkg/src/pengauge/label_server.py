"""HTTP service for the cluster-labeling workflow.

The browser UI is a thin client: clustering, quantization, overlays, and
exports all happen here so the Python side stays the single source of truth.
Session state lives in memory; only exports touch the dataset directory.
"""

import io
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import dataset as ds
from .clustering import (
    ClusterLegend,
    ClusterModel,
    export_example,
    kmeans,
    legend_from_model,
    legend_to_mask,
    quantize,
)
from .errors import PengaugeError
from .imaging import CLASS_IDS, Image, center_crop, read_image, rgb_to_lab, write_image, write_labeled_mask

PNG = "image/png"


@dataclass
class LabelSession:
    image_id: str
    crop: Image
    crop_rect: str
    model: ClusterModel | None = None
    legend: ClusterLegend | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def _png_bytes(img: Image) -> bytes:
    buf = io.BytesIO()
    write_image(img, buf)
    return buf.getvalue()


def _legend_json(legend: ClusterLegend) -> list[dict]:
    return [
        {
            "index": e.index,
            "centroid_rgb": list(e.centroid_rgb),
            "pixel_count": e.pixel_count,
            "enabled": e.enabled,
            "class_name": next((n for n, cid in CLASS_IDS.items() if cid == e.class_id), None),
        }
        for e in legend.entries
    ]


def create_app(dataset_dir, static_dir=None, crop_fraction: float = 1.0) -> FastAPI:
    app = FastAPI(title="pengauge labeler")
    sessions: dict[str, LabelSession] = {}
    sessions_lock = threading.Lock()

    def get_session(image_id: str) -> LabelSession:
        frame = ds.frame_path(dataset_dir, image_id)
        if not frame.exists():
            raise HTTPException(status_code=404, detail=f"unknown image {image_id}")
        with sessions_lock:
            if image_id not in sessions:
                img = read_image(frame)
                x0 = int(img.width * (1 - crop_fraction)) // 2
                y0 = int(img.height * (1 - crop_fraction)) // 2
                crop = center_crop(img, crop_fraction)
                sessions[image_id] = LabelSession(
                    image_id=image_id,
                    crop=crop,
                    crop_rect=f"{x0},{y0},{crop.width},{crop.height}",
                )
            return sessions[image_id]

    @app.get("/api/images")
    def list_images():
        ids = ds.list_frame_ids(dataset_dir)
        labeled = {e.entry_id for e in ds.read_index(dataset_dir)}
        return [{"id": fid, "labeled": fid in labeled} for fid in ids]

    @app.get("/api/images/{image_id}")
    def get_image(image_id: str):
        session = get_session(image_id)
        return Response(content=_png_bytes(session.crop), media_type=PNG)

    @app.post("/api/images/{image_id}/cluster")
    def cluster(image_id: str, body: dict):
        session = get_session(image_id)
        k = body.get("k", 8)
        colorspace = body.get("colorspace", "lab")
        seed = body.get("seed", 0)
        if not isinstance(k, int) or not 1 <= k <= 64:
            raise HTTPException(status_code=400, detail=f"bad k: {k!r}")
        if colorspace not in ("rgb", "lab"):
            raise HTTPException(status_code=400, detail=f"bad colorspace: {colorspace!r}")
        if not isinstance(seed, int):
            raise HTTPException(status_code=400, detail=f"bad seed: {seed!r}")
        with session.lock:
            source = rgb_to_lab(session.crop) if colorspace == "lab" else session.crop
            session.model = kmeans(source, k=k, seed=seed)
            session.legend = legend_from_model(session.model)
            return {"legend": _legend_json(session.legend)}

    def require_model(session: LabelSession) -> tuple[ClusterModel, ClusterLegend]:
        if session.model is None or session.legend is None:
            raise HTTPException(status_code=409, detail="cluster the image first")
        return session.model, session.legend

    @app.get("/api/images/{image_id}/quantized")
    def quantized(image_id: str):
        session = get_session(image_id)
        with session.lock:
            model, _ = require_model(session)
            return Response(content=_png_bytes(quantize(session.crop, model)), media_type=PNG)

    @app.get("/api/images/{image_id}/overlay")
    def overlay(image_id: str, enabled: str = Query(default="")):
        session = get_session(image_id)
        with session.lock:
            model, legend = require_model(session)
            if enabled.strip():
                try:
                    on = {int(tok) for tok in enabled.split(",") if tok.strip() != ""}
                except ValueError:
                    raise HTTPException(status_code=400, detail=f"bad enabled list: {enabled!r}")
            else:
                on = set()
            pixels = session.crop.pixels.copy()
            off_lut = np.array([j not in on for j in range(model.k)], dtype=bool)
            pixels[off_lut[model.assignment]] = 0
            return Response(content=_png_bytes(Image(pixels)), media_type=PNG)

    @app.post("/api/images/{image_id}/labels")
    def set_labels(image_id: str, body: dict):
        session = get_session(image_id)
        with session.lock:
            model, legend = require_model(session)
            for key, value in body.items():
                try:
                    index = int(key)
                except ValueError:
                    raise HTTPException(status_code=400, detail=f"bad cluster index {key!r}")
                if not 0 <= index < model.k:
                    raise HTTPException(status_code=400, detail=f"cluster index {index} out of range")
                if isinstance(value, dict):
                    name = value.get("class_name")
                    if "enabled" in value:
                        legend.set_enabled(index, bool(value["enabled"]))
                else:
                    name = value
                if name is not None and name not in CLASS_IDS:
                    raise HTTPException(status_code=400, detail=f"unknown class {name!r}")
                if name is not None or not isinstance(value, dict) or "class_name" in value:
                    legend.set_class(index, CLASS_IDS[name] if name else None)
            return {"legend": _legend_json(legend)}

    @app.post("/api/images/{image_id}/export")
    def export(image_id: str):
        session = get_session(image_id)
        with session.lock:
            model, legend = require_model(session)
            mask = legend_to_mask(model, legend)
            if not (mask.classes != 0).any():
                raise HTTPException(status_code=409, detail="assign at least one class before exporting")
            mask_path = ds.mask_path(dataset_dir, image_id)
            already = {e.entry_id for e in ds.read_index(dataset_dir)}
            if image_id in already:
                # idempotent re-export: refresh the mask, keep the index line
                write_labeled_mask(mask, mask_path)
            else:
                try:
                    export_example(
                        session.crop, mask, dataset_dir, image_id, year=0,
                        location="labeler", crop=session.crop_rect,
                    )
                except PengaugeError as exc:
                    raise HTTPException(status_code=409, detail=str(exc))
            return {"mask_path": str(mask_path)}

    @app.exception_handler(PengaugeError)
    def domain_error(_, exc: PengaugeError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
