"""Triangular meshes with tagged boundary edges."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np
from scipy.spatial import Delaunay

TAGS = ("inner", "outer", "free")
DEGENERATE_AREA = 1e-14


class MeshError(ValueError):
    """Malformed or degenerate mesh; ``triangle`` is the offending index when known."""

    def __init__(self, msg: str, triangle: Optional[int] = None):
        super().__init__(msg)
        self.triangle = triangle


class MeshFormatError(MeshError):
    """Syntax error in a mesh file; carries the file name and 1-based line."""

    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = str(path)
        self.line = line


@dataclass
class Mesh:
    """Conforming P1 triangulation of a planar domain.

    Parameters
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Vertex indices; clockwise triangles are reoriented.
    boundary_edges : (nbe, 2) int array
    edge_tags : sequence of str
        One of ``inner``, ``outer``, ``free`` per boundary edge.
    h : float, optional
        Characteristic size; defaults to the mean edge length.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    h: Optional[float] = None
    area: np.ndarray = field(init=False, repr=False)
    grads: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        V = np.ascontiguousarray(self.vertices, dtype=float)
        T = np.ascontiguousarray(self.triangles, dtype=np.int64)
        E = np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        tags = np.asarray(self.edge_tags, dtype=object).reshape(-1)
        if V.ndim != 2 or V.shape[1] != 2:
            raise MeshError("vertices must have shape (nv, 2)")
        if not np.all(np.isfinite(V)):
            raise MeshError("non-finite vertex coordinates")
        if T.ndim != 2 or T.shape[1] != 3 or len(T) == 0:
            raise MeshError("triangles must have shape (nt, 3) with nt > 0")
        nv = len(V)
        if T.min() < 0 or T.max() >= nv:
            raise MeshError("triangle vertex index out of range")
        if len(E) and (E.min() < 0 or E.max() >= nv):
            raise MeshError("boundary edge vertex index out of range")
        if len(tags) != len(E):
            raise MeshError("one tag per boundary edge required")
        bad = set(tags) - set(TAGS)
        if bad:
            raise MeshError(f"unknown boundary tags {sorted(bad)}")

        x0, x1, x2 = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
        a2 = (x1[:, 0] - x0[:, 0]) * (x2[:, 1] - x0[:, 1]) - (x2[:, 0] - x0[:, 0]) * (x1[:, 1] - x0[:, 1])
        span = np.ptp(V, axis=0)
        tol = DEGENERATE_AREA * float(max(span[0], span[1])) ** 2
        if np.any(np.abs(a2) / 2 < tol):
            k = int(np.argmin(np.abs(a2)))
            raise MeshError(f"degenerate triangle {k} (area {abs(a2[k]) / 2:.3e})", triangle=k)
        flip = a2 < 0
        if flip.any():
            T[flip] = T[flip][:, [0, 2, 1]]
            a2 = np.abs(a2)

        # every edge shared by at most two triangles
        ed = np.sort(T[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        _, counts = np.unique(ed, axis=0, return_counts=True)
        if counts.max() > 2:
            raise MeshError("non-conforming triangulation: edge shared by more than two triangles")

        self.vertices, self.triangles, self.boundary_edges, self.edge_tags = V, T, E, tags
        self.area = a2 / 2
        P = V[T]
        G = np.empty((len(T), 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            G[:, i, 0] = P[:, j, 1] - P[:, k, 1]
            G[:, i, 1] = P[:, k, 0] - P[:, j, 0]
        self.grads = np.ascontiguousarray(G / a2[:, None, None])
        if self.h is None:
            self.h = float(np.mean(np.linalg.norm(V[ed[:, 0]] - V[ed[:, 1]], axis=1)))

    @property
    def nv(self) -> int:
        return len(self.vertices)

    @property
    def nt(self) -> int:
        return len(self.triangles)

    def tagged_nodes(self, tag: str) -> np.ndarray:
        return np.unique(self.boundary_edges[self.edge_tags == tag].ravel())

    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.nv, dtype=bool)
        mask[self.boundary_edges.ravel()] = False
        return np.flatnonzero(mask)

    def locate(self, points) -> tuple:
        """Containing triangle and barycentric weights for each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        P = self.vertices[self.triangles]
        tri = np.empty(len(pts), dtype=np.int64)
        lam = np.empty((len(pts), 3))
        for m, x in enumerate(pts):
            l = np.einsum("tkd,td->tk", self.grads, x - P[:, 0])
            l[:, 0] = 1.0 - l[:, 1] - l[:, 2]
            k = int(np.argmax(l.min(axis=1)))
            if l[k].min() < -1e-9:
                raise MeshError(f"point {tuple(x)} outside the mesh")
            tri[m], lam[m] = k, l[k]
        return tri, lam

    def interpolate(self, values, points) -> np.ndarray:
        tri, lam = self.locate(points)
        return np.sum(np.asarray(values)[self.triangles[tri]] * lam, axis=1)


def annulus_mesh(r0: float, R: float, h: float, center=(0.0, 0.0)) -> Mesh:
    """Round annulus ``r0 <= |x - center| <= R`` with tagged circles.

    Nodes sit on concentric rings spaced ``(R - r0)/ceil((R - r0)/h)`` apart,
    each with ``ceil(2 pi r / h)`` equally spaced nodes (offset by half a
    step on every other ring); rings depend only on their radius, so two
    annuli with the same ``r0`` and ``h`` share all common rings exactly.
    The triangulation is the Delaunay triangulation with the hole removed.
    Inner edges are tagged ``inner``, outer edges ``outer``.
    """
    if not 0 < r0 < R:
        raise MeshError(f"need 0 < r0 < R, got r0={r0}, R={R}")
    if not 0 < h < R - r0:
        raise MeshError("mesh size must be positive and below R - r0")
    nr = int(math.ceil((R - r0) / h - 1e-9))
    dr = (R - r0) / nr
    pts = []
    for k in range(nr + 1):
        r = r0 + k * dr
        m = max(8, int(math.ceil(2 * math.pi * r / h - 1e-9)))
        th = 2 * math.pi * (np.arange(m) + 0.5 * (k % 2)) / m
        pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
    V = np.vstack(pts)
    tri = Delaunay(V).simplices
    cen = V[tri].mean(axis=1)
    tri = tri[np.hypot(cen[:, 0], cen[:, 1]) > r0]
    V = V + np.asarray(center, dtype=float)

    ed = np.sort(tri[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, counts = np.unique(ed, axis=0, return_counts=True)
    bnd = uniq[counts == 1]
    rad = np.hypot(*(V[bnd].mean(axis=1) - center).T)
    tags = np.where(rad < 0.5 * (r0 + R), "inner", "outer").astype(object)
    return Mesh(V, tri, bnd, tags, h=h)


def unit_square_mesh(n: int) -> Mesh:
    """Structured mesh of ``[0,1]^2`` with all boundary edges tagged ``free``."""
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    V = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a, b, c, d = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel(), idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    T = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    edges = []
    for side in (idx[:, 0], idx[-1, :], idx[::-1, -1], idx[0, ::-1]):
        edges.extend(zip(side[:-1], side[1:]))
    E = np.array(edges)
    return Mesh(V, T, E, np.full(len(E), "free", dtype=object), h=1.0 / n)


def write_mesh(mesh: Mesh, path) -> None:
    from ..io import atomic_write_text

    lines = [f"{mesh.nv} {mesh.nt} {len(mesh.boundary_edges)}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines += [f"{i} {j} {t}" for (i, j), t in zip(mesh.boundary_edges.tolist(), mesh.edge_tags)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _tokens(path, rows: Iterable[str]):
    for lineno, raw in rows:
        s = raw.split("#", 1)[0].strip()
        if s:
            yield lineno, s.split()


def read_mesh(path, h: Optional[float] = None) -> Mesh:
    """Parse the plain-text mesh format.

    Line 1 holds ``nv nt nbe``; then ``nv`` lines ``x y``, ``nt`` lines
    ``i j k`` and ``nbe`` lines ``i j tag``. Blank lines and ``#`` comments
    are skipped. Errors report the offending line.
    """
    path = Path(path)
    rows = list(_tokens(path, enumerate(path.read_text().splitlines(), start=1)))
    if not rows:
        raise MeshFormatError(path, 1, "empty mesh file")

    def ints(lineno, toks, k):
        if len(toks) != k:
            raise MeshFormatError(path, lineno, f"expected {k} fields, got {len(toks)}")
        try:
            return [int(t) for t in toks]
        except ValueError:
            raise MeshFormatError(path, lineno, f"expected integers, got {' '.join(toks)!r}") from None

    lineno, toks = rows[0]
    nv, nt, nbe = ints(lineno, toks, 3)
    if min(nv, nt, nbe) < 0:
        raise MeshFormatError(path, lineno, "negative count")
    if len(rows) < 1 + nv + nt + nbe:
        last = rows[-1][0]
        raise MeshFormatError(path, last, f"file ends early: expected {nv + nt + nbe} records after the header")
    if len(rows) > 1 + nv + nt + nbe:
        raise MeshFormatError(path, rows[1 + nv + nt + nbe][0], "unexpected trailing data")
    V = np.empty((nv, 2))
    for m, (lineno, toks) in enumerate(rows[1:1 + nv]):
        if len(toks) != 2:
            raise MeshFormatError(path, lineno, f"expected 'x y', got {len(toks)} fields")
        try:
            V[m] = [float(t) for t in toks]
        except ValueError:
            raise MeshFormatError(path, lineno, f"bad coordinate {' '.join(toks)!r}") from None
    T = np.array([ints(l, t, 3) for l, t in rows[1 + nv:1 + nv + nt]], dtype=np.int64).reshape(-1, 3)
    E = np.empty((nbe, 2), dtype=np.int64)
    tags = np.empty(nbe, dtype=object)
    for m, (lineno, toks) in enumerate(rows[1 + nv + nt:]):
        if len(toks) != 3:
            raise MeshFormatError(path, lineno, "expected 'i j tag'")
        E[m] = ints(lineno, toks[:2], 2)
        if toks[2] not in TAGS:
            raise MeshFormatError(path, lineno, f"unknown tag {toks[2]!r}")
        tags[m] = toks[2]
    for lineno, toks in rows[1 + nv:]:
        idx = [int(t) for t in toks[:3] if t.lstrip("-").isdigit()]
        if any(i < 0 or i >= nv for i in idx):
            raise MeshFormatError(path, lineno, f"vertex index out of range 0..{nv - 1}")
    try:
        return Mesh(V, T, E, tags, h=h)
    except MeshFormatError:
        raise
    except MeshError as exc:
        k = exc.triangle
        line = rows[1 + nv + k][0] if k is not None else rows[0][0]
        raise MeshFormatError(path, line, str(exc)) from None


def mesh_summary(mesh: Mesh) -> Dict[str, float]:
    return {
        "nv": mesh.nv,
        "nt": mesh.nt,
        "h": mesh.h,
        "min_area": float(mesh.area.min()),
        "total_area": float(mesh.area.sum()),
    }
