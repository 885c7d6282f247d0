"""Mediated VR live-streaming toolkit.

Core pieces: 3D math and ray picking, a headless scripted scene simulator,
co-host camera rigs, a software rasterizer with audience-scoped overlays,
a session/command state machine, and a buffered multi-resolution fan-out
for spectators. The FastAPI service in :mod:`funnel.service` wires them
into one long-running server; :mod:`funnel.cli` is the entry point.
"""

__version__ = "0.1.0"
