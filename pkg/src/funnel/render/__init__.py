"""Software rendering: z-buffered flat-shaded frames with scoped overlays."""

from .raster import Frame, FrameBuffers, rasterize_triangles  # noqa: F401
from .overlays import (  # noqa: F401
    Annotation,
    Audience,
    SelectionSet,
    Target,
    WindowedAnnotation,
    composite_windowed,
    outline_pass,
    render,
    render_thumbnail,
)
