"""2D electrostatic cross-section solver and thin-film interface participations.

Solves Laplace's equation for a coplanar-waveguide (or parallel-plate)
cross-section on a uniform node-centered grid with a conservative 5-point
stencil and piecewise-constant permittivity, then evaluates how much of the
total electric-field energy would live in nanometer-scale contamination
layers at the substrate-metal (SM), substrate-vacuum (SV) and metal-vacuum
(MV) interfaces.

The layers are far too thin to mesh; instead they are post-processed from
the unperturbed solution using the standard thin-film boundary conditions.
For a layer of thickness t and permittivity eps_l on an interface whose
sampled side has permittivity eps_a, the energy per unit length is

    u = (eps0/2) t [ eps_l |E_par|^2 + (eps_a^2 / eps_l) |E_perp|^2 ]

(E continuous along the film, D continuous across it).  On metal-backed
interfaces E_par vanishes and only the perpendicular term survives.  The
participation is u divided by the total field energy W computed with the
same eps0/2 convention, so the prefactor cancels and only ratios matter.

Fields entering the integrals are sampled one grid cell away from each
interface on the side the formula names (substrate side for SM, vacuum side
for MV and SV).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.constants import epsilon_0

from .errors import (
    ConvergenceNotReachedError,
    InterfaceNotSampledError,
    LinearSolveError,
)

__all__ = [
    "InterfaceLayer",
    "CpwGeometry",
    "PlateGeometry",
    "BoundarySegment",
    "FieldSolution",
    "ParticipationSet",
    "default_interface_layers",
    "solve_cross_section",
    "compute_participations",
    "refine_until_converged",
    "capacitance_from_energy",
    "capacitance_from_charge",
    "participation_report",
]

# Node labels on the grid.
FREE = 0
CENTER = 1
GROUND = 2
WALL = 3

INTERFACE_KINDS = ("sm", "sv", "mv")

# Direct sparse factorization below this many unknowns, algebraic multigrid
# above (both deterministic for a fixed grid).
_DIRECT_SOLVE_LIMIT = 150_000
_SOLVE_RTOL = 1e-12


@dataclass(frozen=True)
class InterfaceLayer:
    """A thin contamination film: thickness in meters and relative permittivity."""

    thickness: float
    epsilon: float

    def __post_init__(self):
        if self.thickness <= 0:
            raise ValueError(f"layer thickness must be positive, got {self.thickness}")
        if self.epsilon < 1:
            raise ValueError(f"layer permittivity must be >= 1, got {self.epsilon}")


def default_interface_layers(thickness: float = 3e-9) -> dict[str, InterfaceLayer]:
    """Standard film stack: intrinsic-silicon SM, native-oxide SV, alumina MV."""
    return {
        "sm": InterfaceLayer(thickness=thickness, epsilon=11.6),
        "sv": InterfaceLayer(thickness=thickness, epsilon=4.0),
        "mv": InterfaceLayer(thickness=thickness, epsilon=10.0),
    }


def _validate_layers(layers):
    for kind, layer in layers.items():
        if kind not in INTERFACE_KINDS:
            raise ValueError(f"unknown interface kind {kind!r}; expected one of "
                             f"{INTERFACE_KINDS}")
        if not isinstance(layer, InterfaceLayer):
            raise ValueError(f"layer {kind!r} must be an InterfaceLayer")


@dataclass(frozen=True)
class CpwGeometry:
    """Cross-section of a CPW on a dielectric half-space.

    The center trace (width ``center_width``) and the ground planes (from
    ``center_width/2 + gap`` out to the domain edge) sit on the substrate
    surface.  The domain must keep a margin of at least five times the
    full conductor span ``w + 2g`` between the field region and every
    outer wall; omitted domain dimensions default to exactly that margin.
    Interface layers are post-processed, never meshed, so their thickness
    must stay far below one grid cell.
    """

    center_width: float
    gap: float
    metal_thickness: float = 100e-9
    substrate_epsilon: float = 11.6
    half_width: float | None = None
    height_above: float | None = None
    depth_below: float | None = None
    layers: dict = field(default_factory=default_interface_layers)
    cells_per_gap: int = 8

    def __post_init__(self):
        if self.center_width <= 0 or self.gap <= 0:
            raise ValueError("center_width and gap must be positive")
        if self.metal_thickness <= 0:
            raise ValueError("metal_thickness must be positive")
        if self.substrate_epsilon < 1:
            raise ValueError("substrate_epsilon must be >= 1")
        if self.cells_per_gap < 2:
            raise ValueError("cells_per_gap must be >= 2")
        _validate_layers(self.layers)

        margin = self.margin
        object.__setattr__(self, "half_width",
                           self.center_width / 2 + self.gap + margin
                           if self.half_width is None else self.half_width)
        object.__setattr__(self, "height_above",
                           margin if self.height_above is None else self.height_above)
        object.__setattr__(self, "depth_below",
                           margin if self.depth_below is None else self.depth_below)

        lateral = self.half_width - (self.center_width / 2 + self.gap)
        for name, value in (("lateral", lateral), ("height_above", self.height_above),
                            ("depth_below", self.depth_below)):
            if value < margin * (1 - 1e-9):
                raise ValueError(
                    f"domain too small: {name} margin {value:.3g} m is below the "
                    f"required 5*(w+2g) = {margin:.3g} m")

    @property
    def margin(self) -> float:
        return 5.0 * (self.center_width + 2.0 * self.gap)


@dataclass(frozen=True)
class PlateGeometry:
    """Parallel-plate capacitor: the degenerate geometry with a closed form.

    The driven plate spans the whole top of the domain and the grounded
    plate the bottom; the side walls are symmetry (zero-flux) boundaries,
    so the interior field is exactly uniform and thin-film participations
    reduce to the series-capacitor expressions.  With ``split_interface``
    the left half of the dielectric has ``medium_epsilon`` and the right
    half is vacuum, creating a vertical dielectric-vacuum interface that
    carries the "sv" layer; otherwise "sm" sits on the bottom plate and
    "mv" on the top plate, both facing the single medium.

    ``cells_per_gap`` counts grid cells across the plate separation.
    """

    width: float
    separation: float
    medium_epsilon: float = 1.0
    split_interface: bool = False
    layers: dict = field(default_factory=dict)
    cells_per_gap: int = 8

    def __post_init__(self):
        if self.width <= 0 or self.separation <= 0:
            raise ValueError("width and separation must be positive")
        if self.medium_epsilon < 1:
            raise ValueError("medium_epsilon must be >= 1")
        if self.cells_per_gap < 2:
            raise ValueError("cells_per_gap must be >= 2")
        _validate_layers(self.layers)


@dataclass(frozen=True)
class BoundarySegment:
    """Field samples along one interface segment, ready for integration.

    ``e_parallel`` / ``e_perpendicular`` are the field components along and
    across the interface, sampled one cell away on ``side`` (whose relative
    permittivity is ``side_epsilon``); ``weight`` is the arc length each
    sample represents.
    """

    interface: str
    conductor: str
    side: str
    side_epsilon: float
    x: np.ndarray
    y: np.ndarray
    e_parallel: np.ndarray
    e_perpendicular: np.ndarray
    weight: float


@dataclass(frozen=True)
class FieldSolution:
    """Solved cross-section: potential, fields, energy and boundary samples."""

    x: np.ndarray
    y: np.ndarray
    h: float
    potential: np.ndarray
    e_x: np.ndarray
    e_y: np.ndarray
    total_energy: float
    v_excitation: float
    segments: tuple
    conductor_charge: dict
    labels: np.ndarray
    cells_per_gap: int
    sample_offset: float


@dataclass(frozen=True)
class ParticipationSet:
    """Interface participations, attributable per conductor region.

    Fields are ``None`` for interfaces the geometry carries no layer on.
    ``per_conductor`` maps conductor label to its share of each interface,
    e.g. ``per_conductor["center"]["sm"]``.  ``error_estimate`` is the
    relative change observed at the last mesh refinement, when one ran.
    """

    p_sm: float | None
    p_sv: float | None
    p_mv: float | None
    per_conductor: dict
    cells_per_gap: int
    error_estimate: float | None = None

    def __post_init__(self):
        total = 0.0
        for name, value in self.as_dict().items():
            if value is not None:
                if not 0.0 < value < 1.0:
                    raise ValueError(f"participation {name} = {value} outside (0, 1)")
                total += value
        if total >= 0.1:
            raise ValueError(
                f"thin films cannot hold {total:.3g} of the total energy; "
                "check layer thicknesses")

    def as_dict(self) -> dict:
        return {"sm": self.p_sm, "sv": self.p_sv, "mv": self.p_mv}


# ---------------------------------------------------------------------------
# Grid construction
# ---------------------------------------------------------------------------

@dataclass
class _Grid:
    x: np.ndarray
    y: np.ndarray
    h: float
    eps_cell: np.ndarray        # (ny-1, nx-1)
    labels: np.ndarray          # (ny, nx) of FREE/CENTER/GROUND/WALL
    dirichlet_value: np.ndarray  # (ny, nx), meaningful where labels > 0


def _grid_shape_cpw(geom: CpwGeometry, cells_per_gap: int) -> tuple[int, int]:
    h = geom.gap / cells_per_gap
    nhx = math.ceil(geom.half_width / h)
    nb = math.ceil(geom.depth_below / h)
    na = math.ceil(geom.height_above / h)
    return nb + na + 1, 2 * nhx + 1


def _grid_shape_plate(geom: PlateGeometry, cells_per_gap: int) -> tuple[int, int]:
    h = geom.separation / cells_per_gap
    return cells_per_gap + 1, int(round(geom.width / h)) + 1


def _check_layers_resolvable(layers, h):
    for kind, layer in layers.items():
        if layer.thickness > h / 10:
            raise ValueError(
                f"layer {kind!r} thickness {layer.thickness:.3g} m is not far "
                f"below the grid cell {h:.3g} m; layers are post-processed, "
                "not meshed")


def _build_cpw_grid(geom: CpwGeometry, cells_per_gap: int, v_center: float) -> _Grid:
    h = geom.gap / cells_per_gap
    _check_layers_resolvable(geom.layers, h)
    iw = int(round(geom.center_width / 2 / h))
    if iw < 1:
        raise ValueError("center_width is below one grid cell; raise cells_per_gap")
    ig = iw + cells_per_gap
    nhx = math.ceil(geom.half_width / h)
    nb = math.ceil(geom.depth_below / h)
    na = math.ceil(geom.height_above / h)
    if na < 3 or nb < 3 or nhx <= ig:
        raise ValueError("domain does not enclose the conductors")

    ny, nx = nb + na + 1, 2 * nhx + 1
    x = (np.arange(nx) - nhx) * h
    y = (np.arange(ny) - nb) * h
    j0 = nb

    eps_cell = np.ones((ny - 1, nx - 1))
    eps_cell[:nb, :] = geom.substrate_epsilon

    labels = np.full((ny, nx), FREE, dtype=np.int8)
    labels[0, :] = WALL
    labels[-1, :] = WALL
    labels[:, 0] = WALL
    labels[:, -1] = WALL
    n_t = int(round(geom.metal_thickness / h))
    rows = slice(j0, j0 + n_t + 1)
    labels[rows, nhx - iw:nhx + iw + 1] = CENTER
    labels[rows, :nhx - ig + 1] = GROUND
    labels[rows, nhx + ig:] = GROUND

    value = np.zeros((ny, nx))
    value[labels == CENTER] = v_center
    return _Grid(x=x, y=y, h=h, eps_cell=eps_cell, labels=labels,
                 dirichlet_value=value)


def _build_plate_grid(geom: PlateGeometry, cells_per_gap: int, v_top: float) -> _Grid:
    h = geom.separation / cells_per_gap
    _check_layers_resolvable(geom.layers, h)
    ny = cells_per_gap + 1
    nx = int(round(geom.width / h)) + 1
    if nx < 4:
        raise ValueError("plate width is below a few grid cells")
    x = np.arange(nx) * h
    y = np.arange(ny) * h

    eps_cell = np.full((ny - 1, nx - 1), geom.medium_epsilon)
    if geom.split_interface:
        i_split = nx // 2
        eps_cell[:, i_split:] = 1.0

    # Side columns stay FREE: zero-flux symmetry walls.
    labels = np.full((ny, nx), FREE, dtype=np.int8)
    labels[0, :] = GROUND
    labels[-1, :] = CENTER

    value = np.zeros((ny, nx))
    value[-1, :] = v_top
    return _Grid(x=x, y=y, h=h, eps_cell=eps_cell, labels=labels,
                 dirichlet_value=value)


# ---------------------------------------------------------------------------
# Assembly and solve
# ---------------------------------------------------------------------------

def _face_coefficients(eps_cell: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flux coefficients for x-directed and y-directed node-to-node faces.

    Boundary faces carry half weight (half control volumes), which doubles
    as the zero-flux treatment on free boundary nodes.
    """
    n_cy, n_cx = eps_cell.shape
    pad_rows = np.zeros((n_cy + 2, n_cx))
    pad_rows[1:-1, :] = eps_cell
    coeff_x = 0.5 * (pad_rows[:-1, :] + pad_rows[1:, :])      # (ny, nx-1)
    pad_cols = np.zeros((n_cy, n_cx + 2))
    pad_cols[:, 1:-1] = eps_cell
    coeff_y = 0.5 * (pad_cols[:, :-1] + pad_cols[:, 1:])      # (ny-1, nx)
    return coeff_x, coeff_y


def _solve_grid(grid: _Grid) -> np.ndarray:
    """Solve the interior potential; conductor and wall nodes are fixed."""
    ny, nx = grid.labels.shape
    n = ny * nx
    coeff_x, coeff_y = _face_coefficients(grid.eps_cell)

    fixed = grid.labels != FREE
    v_fixed = np.where(fixed, grid.dirichlet_value, 0.0).ravel()
    free = ~fixed.ravel()
    reduced_index = np.cumsum(free) - 1
    n_free = int(free.sum())
    if n_free == 0:
        return grid.dirichlet_value.copy()

    idx = np.arange(n).reshape(ny, nx)
    rows_list, cols_list, vals_list = [], [], []
    rhs = np.zeros(n_free)

    def add_faces(a_idx, b_idx, coeff):
        a = a_idx.ravel()
        b = b_idx.ravel()
        c = coeff.ravel()
        a_free = free[a]
        b_free = free[b]

        both = a_free & b_free
        ar, br, cc = reduced_index[a[both]], reduced_index[b[both]], c[both]
        rows_list.append(np.concatenate([ar, br, ar, br]))
        cols_list.append(np.concatenate([ar, br, br, ar]))
        vals_list.append(np.concatenate([cc, cc, -cc, -cc]))

        only_a = a_free & ~b_free
        ar, cc = reduced_index[a[only_a]], c[only_a]
        rows_list.append(ar)
        cols_list.append(ar)
        vals_list.append(cc)
        np.add.at(rhs, ar, cc * v_fixed[b[only_a]])

        only_b = b_free & ~a_free
        br, cc = reduced_index[b[only_b]], c[only_b]
        rows_list.append(br)
        cols_list.append(br)
        vals_list.append(cc)
        np.add.at(rhs, br, cc * v_fixed[a[only_b]])

    add_faces(idx[:, :-1], idx[:, 1:], coeff_x)
    add_faces(idx[:-1, :], idx[1:, :], coeff_y)

    matrix = sp.coo_matrix(
        (np.concatenate(vals_list),
         (np.concatenate(rows_list), np.concatenate(cols_list))),
        shape=(n_free, n_free)).tocsr()

    if n_free <= _DIRECT_SOLVE_LIMIT:
        solution = spla.spsolve(matrix, rhs)
    else:
        solution = _solve_multigrid(matrix, rhs)

    residual = float(np.linalg.norm(matrix @ solution - rhs))
    scale = float(np.linalg.norm(rhs)) or 1.0
    if not np.isfinite(residual) or residual > 1e-8 * scale:
        raise LinearSolveError(
            f"linear solve failed: residual {residual:.3e} vs rhs norm {scale:.3e}",
            residual_norm=residual)

    v_full = v_fixed.copy()
    v_full[free] = solution
    return v_full.reshape(ny, nx)


def _solve_multigrid(matrix, rhs):
    try:
        import pyamg
    except ImportError:
        return spla.spsolve(matrix, rhs)
    solver = pyamg.ruge_stuben_solver(matrix)
    return solver.solve(rhs, tol=_SOLVE_RTOL, accel="cg", maxiter=500)


# ---------------------------------------------------------------------------
# Boundary sampling
# ---------------------------------------------------------------------------

def _conductor_name(label: int) -> str:
    return {CENTER: "center", GROUND: "ground"}[label]


def _cell_runs(node_mask: np.ndarray) -> np.ndarray:
    """Cell columns whose both bounding nodes satisfy the mask."""
    return np.flatnonzero(node_mask[:-1] & node_mask[1:])


def _row_fields(v: np.ndarray, j: int, h: float):
    """E at cell-center x positions along node row ``j``.

    The parallel (x) component is the exact face gradient; the perpendicular
    (y) component averages the central difference of the two bounding nodes.
    """
    e_par = -(v[j, 1:] - v[j, :-1]) / h
    e_perp = -0.25 * (v[j + 1, 1:] - v[j - 1, 1:]
                      + v[j + 1, :-1] - v[j - 1, :-1]) / h
    return e_par, e_perp


def _column_fields(v: np.ndarray, i: int, h: float):
    """E at cell-center y positions along node column ``i`` (vertical interface)."""
    e_par = -(v[1:, i] - v[:-1, i]) / h
    e_perp = -0.25 * (v[1:, i + 1] - v[1:, i - 1]
                      + v[:-1, i + 1] - v[:-1, i - 1]) / h
    return e_par, e_perp


def _sample_cpw(grid: _Grid, geom: CpwGeometry, v: np.ndarray,
                k_rows: int) -> list[BoundarySegment]:
    h = grid.h
    j0 = int(np.searchsorted(grid.y, 0.0))
    n_t = int(round(geom.metal_thickness / h))
    surface = grid.labels[j0]
    x_cell = 0.5 * (grid.x[:-1] + grid.x[1:])
    segments = []

    sm_par, sm_perp = _row_fields(v, j0 - k_rows, h)
    mv_par, mv_perp = _row_fields(v, j0 + n_t + k_rows, h)
    sv_par, sv_perp = _row_fields(v, j0 + k_rows, h)

    for label in (CENTER, GROUND):
        cols = _cell_runs(surface == label)
        if cols.size == 0:
            continue
        name = _conductor_name(label)
        segments.append(BoundarySegment(
            interface="sm", conductor=name, side="substrate",
            side_epsilon=geom.substrate_epsilon,
            x=x_cell[cols], y=np.full(cols.size, grid.y[j0 - k_rows]),
            e_parallel=sm_par[cols], e_perpendicular=sm_perp[cols], weight=h))
        segments.append(BoundarySegment(
            interface="mv", conductor=name, side="vacuum", side_epsilon=1.0,
            x=x_cell[cols], y=np.full(cols.size, grid.y[j0 + n_t + k_rows]),
            e_parallel=mv_par[cols], e_perpendicular=mv_perp[cols], weight=h))

    gap_cols = _cell_runs(surface == FREE)
    if gap_cols.size:
        # Split gap samples by the nearer conductor edge.
        near_center = np.abs(x_cell[gap_cols]) < geom.center_width / 2 + geom.gap / 2
        for mask, name in ((near_center, "center"), (~near_center, "ground")):
            cols = gap_cols[mask]
            if cols.size == 0:
                continue
            segments.append(BoundarySegment(
                interface="sv", conductor=name, side="vacuum", side_epsilon=1.0,
                x=x_cell[cols], y=np.full(cols.size, grid.y[j0 + k_rows]),
                e_parallel=sv_par[cols], e_perpendicular=sv_perp[cols], weight=h))
    return segments


def _sample_plate(grid: _Grid, geom: PlateGeometry, v: np.ndarray,
                  k_rows: int) -> list[BoundarySegment]:
    ny, nx = grid.labels.shape
    h = grid.h
    x_cell = 0.5 * (grid.x[:-1] + grid.x[1:])
    j_bottom = k_rows
    j_top = (ny - 1) - k_rows
    bot_par, bot_perp = _row_fields(v, j_bottom, h)
    top_par, top_perp = _row_fields(v, j_top, h)
    segments = []
    regions = [(np.arange(nx - 1), geom.medium_epsilon)]
    if geom.split_interface:
        i_split = nx // 2
        regions = [(np.arange(i_split), geom.medium_epsilon),
                   (np.arange(i_split, nx - 1), 1.0)]

    for cols, eps_side in regions:
        if cols.size == 0:
            continue
        segments.append(BoundarySegment(
            interface="sm", conductor="ground", side="medium", side_epsilon=eps_side,
            x=x_cell[cols], y=np.full(cols.size, grid.y[j_bottom]),
            e_parallel=bot_par[cols], e_perpendicular=bot_perp[cols], weight=h))
        segments.append(BoundarySegment(
            interface="mv", conductor="center", side="medium", side_epsilon=eps_side,
            x=x_cell[cols], y=np.full(cols.size, grid.y[j_top]),
            e_parallel=top_par[cols], e_perpendicular=top_perp[cols], weight=h))

    if geom.split_interface:
        i_v = min(nx // 2 + k_rows, nx - 2)
        # Vertical interface: "parallel" is the y direction, sampled on the
        # vacuum side.
        e_par, e_perp = _column_fields(v, i_v, h)
        segments.append(BoundarySegment(
            interface="sv", conductor="center", side="vacuum", side_epsilon=1.0,
            x=np.full(ny - 1, grid.x[i_v]), y=0.5 * (grid.y[:-1] + grid.y[1:]),
            e_parallel=e_par, e_perpendicular=e_perp, weight=h))
    return segments


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def _solve_on_grid(geom, cells_per_gap: int, v_excitation: float,
                   sample_rows: int = 1) -> FieldSolution:
    if isinstance(geom, CpwGeometry):
        grid = _build_cpw_grid(geom, cells_per_gap, v_excitation)
        sampler = _sample_cpw
    elif isinstance(geom, PlateGeometry):
        grid = _build_plate_grid(geom, cells_per_gap, v_excitation)
        sampler = _sample_plate
    else:
        raise TypeError(f"unsupported geometry type {type(geom).__name__}")

    potential = _solve_grid(grid)
    d_dy, d_dx = np.gradient(potential, grid.h)
    ex, ey = -d_dx, -d_dy

    # Cell-centered field for the energy sum.
    h = grid.h
    ex_c = -0.5 * ((potential[:-1, 1:] - potential[:-1, :-1])
                   + (potential[1:, 1:] - potential[1:, :-1])) / h
    ey_c = -0.5 * ((potential[1:, :-1] - potential[:-1, :-1])
                   + (potential[1:, 1:] - potential[:-1, 1:])) / h
    energy = 0.5 * epsilon_0 * float(
        np.sum(grid.eps_cell * (ex_c**2 + ey_c**2))) * h * h
    if energy <= 0:
        raise LinearSolveError("solved field carries no energy")

    segments = tuple(sampler(grid, geom, potential, sample_rows))
    charge = _conductor_charges(grid, potential)
    return FieldSolution(x=grid.x, y=grid.y, h=h, potential=potential,
                         e_x=ex, e_y=ey, total_energy=energy,
                         v_excitation=v_excitation, segments=segments,
                         conductor_charge=charge, labels=grid.labels,
                         cells_per_gap=cells_per_gap,
                         sample_offset=sample_rows * h)


def solve_cross_section(geom, v_center: float = 1.0,
                        sample_offset: float | None = None) -> FieldSolution:
    """Solve the electrostatic cross-section at the geometry's resolution.

    The driven conductor is held at ``v_center``, grounds and outer walls
    at zero.  Returns the potential, node-centered fields, total field
    energy per unit length and per-interface boundary samples.

    Boundary fields are sampled one grid cell away from each interface, on
    the side named by the thin-film formula (or at ``sample_offset``,
    rounded to a whole number of cells).  Idealized zero-thickness
    conductor edges make the near-edge field diverge like 1/sqrt(r), so
    these interface integrals grow logarithmically as the sampling line
    approaches the surface; in real devices the metal thickness cuts the
    divergence off, so the sampling offset should be kept near that scale.
    """
    if v_center == 0:
        raise ValueError("v_center must be nonzero")
    h = (geom.gap if isinstance(geom, CpwGeometry) else geom.separation) \
        / geom.cells_per_gap
    k = 1 if sample_offset is None else max(1, int(round(sample_offset / h)))
    return _solve_on_grid(geom, geom.cells_per_gap, v_center, sample_rows=k)


def _conductor_charges(grid: _Grid, potential: np.ndarray) -> dict:
    """Free charge per unit length on each conductor from Gauss's law.

    Sums the discrete flux through every face joining a conductor node to a
    node outside that conductor, which is the charge consistent with the
    stencil itself.
    """
    coeff_x, coeff_y = _face_coefficients(grid.eps_cell)
    labels = grid.labels
    v = potential
    charges = {}
    for label in (CENTER, GROUND):
        total = 0.0
        la, lb = labels[:, :-1], labels[:, 1:]
        va, vb = v[:, :-1], v[:, 1:]
        m = (la == label) & (lb != label)
        total += float(np.sum(coeff_x[m] * (va[m] - vb[m])))
        m = (lb == label) & (la != label)
        total += float(np.sum(coeff_x[m] * (vb[m] - va[m])))
        la, lb = labels[:-1, :], labels[1:, :]
        va, vb = v[:-1, :], v[1:, :]
        m = (la == label) & (lb != label)
        total += float(np.sum(coeff_y[m] * (va[m] - vb[m])))
        m = (lb == label) & (la != label)
        total += float(np.sum(coeff_y[m] * (vb[m] - va[m])))
        charges[_conductor_name(label)] = epsilon_0 * total
    return charges


def capacitance_from_energy(sol: FieldSolution) -> float:
    """Capacitance per unit length from the stored field energy."""
    return 2.0 * sol.total_energy / sol.v_excitation**2


def capacitance_from_charge(sol: FieldSolution) -> float:
    """Capacitance per unit length from the driven conductor's charge."""
    return sol.conductor_charge["center"] / sol.v_excitation


def compute_participations(sol: FieldSolution, geom) -> ParticipationSet:
    """Evaluate thin-film participations from a solved cross-section.

    Integrates the layer energy density over each interface the geometry
    carries a layer for and divides by the total field energy.  Results are
    also attributed per conductor region.
    """
    values = {kind: None for kind in INTERFACE_KINDS}
    per_conductor: dict = {}
    for kind, layer in geom.layers.items():
        segments = [s for s in sol.segments if s.interface == kind]
        if not segments:
            raise InterfaceNotSampledError(
                f"interface not sampled: no {kind!r} boundary in this solution")
        total = 0.0
        for seg in segments:
            contribution = _segment_energy(seg, layer) / sol.total_energy
            total += contribution
            per_conductor.setdefault(seg.conductor, {}).setdefault(kind, 0.0)
            per_conductor[seg.conductor][kind] += contribution
        values[kind] = total
    return ParticipationSet(p_sm=values["sm"], p_sv=values["sv"], p_mv=values["mv"],
                            per_conductor=per_conductor,
                            cells_per_gap=sol.cells_per_gap)


def _segment_energy(seg: BoundarySegment, layer: InterfaceLayer) -> float:
    """Thin-film energy per unit length along one boundary segment."""
    perp = (seg.side_epsilon**2 / layer.epsilon) * seg.e_perpendicular**2
    if seg.interface == "sv":
        integrand = layer.epsilon * seg.e_parallel**2 + perp
    else:
        # Metal-backed film: the tangential field vanishes on the conductor.
        integrand = perp
    return 0.5 * epsilon_0 * layer.thickness * float(np.sum(integrand)) * seg.weight


def refine_until_converged(geom, tolerance: float,
                           max_cells: int = 6_000_000) -> ParticipationSet:
    """Halve the grid spacing until participations settle within ``tolerance``.

    Starting at the geometry's own resolution, doubles ``cells_per_gap``
    until every present participation changes by less than the relative
    ``tolerance`` between successive levels, then returns the finest level
    with that change recorded as its error estimate.  Raises
    :class:`ConvergenceNotReachedError` (with the trajectory of every level
    tried) if the next level would exceed ``max_cells`` grid nodes.

    The boundary-sampling line is frozen at one base-level cell from each
    interface (a node row that exists identically at every level), so
    refinement converges toward a fixed, physically regularized interface
    integral instead of chasing the logarithmic edge divergence of
    idealized thin conductors.
    """
    if not 0.0 < tolerance <= 0.1:
        raise ValueError(f"tolerance must be in (0, 0.1], got {tolerance}")
    shape_of = (_grid_shape_cpw if isinstance(geom, CpwGeometry)
                else _grid_shape_plate)

    trajectory: list[ParticipationSet] = []
    previous = None
    cells_per_gap = geom.cells_per_gap
    while True:
        ny, nx = shape_of(geom, cells_per_gap)
        if ny * nx > max_cells:
            raise ConvergenceNotReachedError(
                f"convergence not reached: next level ({cells_per_gap} cells "
                f"per gap, {ny * nx} nodes) exceeds the {max_cells}-node cap",
                trajectory=trajectory)
        sol = _solve_on_grid(geom, cells_per_gap, 1.0,
                             sample_rows=cells_per_gap // geom.cells_per_gap)
        current = compute_participations(sol, geom)
        if previous is not None:
            change = _relative_change(previous, current)
            current = replace(current, error_estimate=change)
            trajectory.append(current)
            if change < tolerance:
                return current
        else:
            trajectory.append(current)
        previous = current
        cells_per_gap *= 2


def _relative_change(a: ParticipationSet, b: ParticipationSet) -> float:
    changes = []
    for kind, new in b.as_dict().items():
        old = a.as_dict()[kind]
        if new is None or old is None:
            continue
        changes.append(abs(new - old) / abs(new))
    return max(changes) if changes else 0.0


def participation_report(ps: ParticipationSet) -> str:
    """Key = value text block of a participation result."""
    lines = [f"cells_per_gap = {ps.cells_per_gap}"]
    if ps.error_estimate is not None:
        lines.append(f"error_estimate = {ps.error_estimate:.6g}")
    for kind, value in ps.as_dict().items():
        if value is not None:
            lines.append(f"p_{kind} = {value:.6g}")
    for conductor in sorted(ps.per_conductor):
        for kind in sorted(ps.per_conductor[conductor]):
            lines.append(
                f"p_{kind}.{conductor} = {ps.per_conductor[conductor][kind]:.6g}")
    return "\n".join(lines)
