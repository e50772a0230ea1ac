"""Desk-scale fish-pen inspection stack.

Submodules:
    imaging       raster types, CIELAB conversion, crops, PNG I/O
    dataset       frames/masks/index.tsv directory layout
    clustering    K-means labeling engine and dataset export
    segmentation  per-pixel logistic classifier, Dice, external mask ingestion
    net_geometry  mesh-center detection, pinhole distance, ideal-net rendering
    fouling       per-frame coverage, footage filters, mission aggregation
    rovsim        lawnmower missions, PID control loop, sensor simulation
    synthscene    ground-truth net-scene renderer
    label_server  HTTP labeling service
    cli           command-line entrypoint
"""

__version__ = "0.1.0"
