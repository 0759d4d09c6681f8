"""
Noyaux numba de traversée de grille voxel par des segments de droite.

Les coordonnées reçues sont exprimées en unités voxel : la grille occupe
[0, nx] x [0, ny] x [0, nz] et le voxel (ix, iy, iz) est la boîte fermée
[ix, ix+1] x [iy, iy+1] x [iz, iz+1]. Un voxel est retenu dès que le
segment touche sa boîte, y compris par un coin ou une face.

Le parcours de référence (_walk) sert tous les usages ; le mode choisit ce
que devient chaque voxel visité : liste ordonnée, comptage, découpe du
masque ou intégration. Les traitements par lots passent par _step_walk, qui
suit les indices plan par plan et ne revient aux boîtes fermées qu'aux
arêtes et aux coins.
"""
import math

import numba
import numpy as np

MODE_LIST = 0
MODE_COUNT = 1
MODE_CARVE = 2
MODE_CHORD = 3
MODE_UNIT = 4

# Fenêtre de déduplication du mode liste : un voxel n'est visité que par
# des échantillons consécutifs, chacun produisant au plus 8 voxels.
_DEDUP_WINDOW = 32


@numba.njit(cache=True, nogil=True)
def buffer_capacity(nx, ny, nz):
    """Taille maximale de la liste de voxels d'un segment"""
    return 8 * (nx + ny + nz) + 8


@numba.njit(cache=True, nogil=True)
def _closed_range(c, n):
    """Indices [lo, hi] des cellules fermées contenant la coordonnée c"""
    f = math.floor(c)
    lo = int(f)
    hi = lo
    if c == f:
        lo -= 1
    if lo < 0:
        lo = 0
    if hi > n - 1:
        hi = n - 1
    return lo, hi


@numba.njit(cache=True, nogil=True)
def _clamp(c, n):
    if c < 0.0:
        return 0.0
    if c > n:
        return float(n)
    return c


@numba.njit(cache=True, nogil=True)
def _append(ix, iy, iz, share, out, lens, n):
    found = -1
    start = n - _DEDUP_WINDOW if n > _DEDUP_WINDOW else 0
    for m in range(start, n):
        if out[m, 0] == ix and out[m, 1] == iy and out[m, 2] == iz:
            found = m
            break
    if found >= 0:
        lens[found] += share
    elif n < out.shape[0]:
        out[n, 0] = ix
        out[n, 1] = iy
        out[n, 2] = iz
        lens[n] = share
        n += 1
    return n


@numba.njit(cache=True, nogil=True)
def _visit(cx, cy, cz, nx, ny, nz, sx, sy, sz, weight, mode, tag, unit_step,
           out, lens, n, counts, stamp, mask, volume, acc):
    """Traite les voxels contenant le point (cx, cy, cz) ; le poids est réparti entre eux"""
    lox, hix = _closed_range(cx, nx)
    loy, hiy = _closed_range(cy, ny)
    loz, hiz = _closed_range(cz, nz)
    if lox > hix or loy > hiy or loz > hiz:
        return n, acc

    share = weight / ((hix - lox + 1) * (hiy - loy + 1) * (hiz - loz + 1))
    for a in range(hix - lox + 1):
        ix = lox + a if sx >= 0 else hix - a
        for b in range(hiy - loy + 1):
            iy = loy + b if sy >= 0 else hiy - b
            for c in range(hiz - loz + 1):
                iz = loz + c if sz >= 0 else hiz - c
                if mode == MODE_LIST:
                    n = _append(ix, iy, iz, share, out, lens, n)
                elif mode == MODE_COUNT:
                    if stamp[iz, iy, ix] != tag:
                        stamp[iz, iy, ix] = tag
                        counts[iz, iy, ix] += 1
                elif mode == MODE_CARVE:
                    mask[iz, iy, ix] = 0
                elif mode == MODE_CHORD:
                    acc += volume[iz, iy, ix] * share
                elif share > 0.0:
                    acc += volume[iz, iy, ix] * unit_step
    return n, acc


@numba.njit(cache=True, nogil=True)
def _first_plane(c_enter, u0, d, t_enter):
    """Premier plan entier franchi après t_enter le long d'un axe"""
    if d > 0.0:
        k = math.floor(c_enter) + 1.0
        while (k - u0) / d <= t_enter:
            k += 1.0
    else:
        k = math.ceil(c_enter) - 1.0
        while (k - u0) / d <= t_enter:
            k -= 1.0
    return k


@numba.njit(cache=True, nogil=True)
def _clip(x0, y0, z0, dx, dy, dz, nx, ny, nz):
    """Intervalle [t_enter, t_exit] du segment dans la grille ; vide si t_enter > t_exit"""
    t_enter = 0.0
    t_exit = 1.0
    u0 = (x0, y0, z0)
    du = (dx, dy, dz)
    dims = (nx, ny, nz)
    for axis in range(3):
        if du[axis] == 0.0:
            if u0[axis] < 0.0 or u0[axis] > dims[axis]:
                return 1.0, 0.0
        else:
            ta = (0.0 - u0[axis]) / du[axis]
            tb = (dims[axis] - u0[axis]) / du[axis]
            if ta > tb:
                ta, tb = tb, ta
            if ta > t_enter:
                t_enter = ta
            if tb < t_exit:
                t_exit = tb
    return t_enter, t_exit


@numba.njit(cache=True, nogil=True)
def _walk(x0, y0, z0, x1, y1, z1, nx, ny, nz, vx, vy, vz, mode, tag, unit_step,
          out, lens, counts, stamp, mask, volume):
    """
    Parcourt le segment de l'entrée vers la sortie en alternant l'intérieur
    de chaque tronçon (poids = longueur en mm) et le point de franchissement
    des plans (poids nul, capture les contacts par face ou coin).
    Renvoie (nombre de voxels listés, somme intégrée).
    """
    n = 0
    acc = 0.0
    dx = x1 - x0
    dy = y1 - y0
    dz = z1 - z0

    t_enter, t_exit = _clip(x0, y0, z0, dx, dy, dz, nx, ny, nz)
    if t_enter > t_exit:
        return n, acc

    length = math.sqrt((dx * vx) ** 2 + (dy * vy) ** 2 + (dz * vz) ** 2)
    sx = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
    sy = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
    sz = 1 if dz > 0.0 else (-1 if dz < 0.0 else 0)

    kx = 0.0
    ky = 0.0
    kz = 0.0
    tx = np.inf
    ty = np.inf
    tz = np.inf
    if sx != 0:
        kx = _first_plane(x0 + t_enter * dx, x0, dx, t_enter)
        tx = (kx - x0) / dx
    if sy != 0:
        ky = _first_plane(y0 + t_enter * dy, y0, dy, t_enter)
        ty = (ky - y0) / dy
    if sz != 0:
        kz = _first_plane(z0 + t_enter * dz, z0, dz, t_enter)
        tz = (kz - z0) / dz

    n, acc = _visit(_clamp(x0 + t_enter * dx, nx), _clamp(y0 + t_enter * dy, ny),
                    _clamp(z0 + t_enter * dz, nz), nx, ny, nz, sx, sy, sz, 0.0,
                    mode, tag, unit_step, out, lens, n, counts, stamp, mask, volume, acc)

    t_prev = t_enter
    for _ in range(nx + ny + nz + 3):
        t_next = min(tx, min(ty, tz))
        if t_next >= t_exit:
            break

        tm = 0.5 * (t_prev + t_next)
        n, acc = _visit(x0 + tm * dx, y0 + tm * dy, z0 + tm * dz, nx, ny, nz, sx, sy, sz,
                        (t_next - t_prev) * length,
                        mode, tag, unit_step, out, lens, n, counts, stamp, mask, volume, acc)

        # Coordonnée exacte sur les plans franchis
        cx = kx if tx == t_next else _clamp(x0 + t_next * dx, nx)
        cy = ky if ty == t_next else _clamp(y0 + t_next * dy, ny)
        cz = kz if tz == t_next else _clamp(z0 + t_next * dz, nz)
        n, acc = _visit(cx, cy, cz, nx, ny, nz, sx, sy, sz, 0.0,
                        mode, tag, unit_step, out, lens, n, counts, stamp, mask, volume, acc)

        if tx == t_next:
            kx += sx
            tx = (kx - x0) / dx
        if ty == t_next:
            ky += sy
            ty = (ky - y0) / dy
        if tz == t_next:
            kz += sz
            tz = (kz - z0) / dz
        t_prev = t_next

    if t_exit > t_prev:
        tm = 0.5 * (t_prev + t_exit)
        n, acc = _visit(x0 + tm * dx, y0 + tm * dy, z0 + tm * dz, nx, ny, nz, sx, sy, sz,
                        (t_exit - t_prev) * length,
                        mode, tag, unit_step, out, lens, n, counts, stamp, mask, volume, acc)
    n, acc = _visit(_clamp(x0 + t_exit * dx, nx), _clamp(y0 + t_exit * dy, ny),
                    _clamp(z0 + t_exit * dz, nz), nx, ny, nz, sx, sy, sz, 0.0,
                    mode, tag, unit_step, out, lens, n, counts, stamp, mask, volume, acc)
    return n, acc


@numba.njit(cache=True, nogil=True)
def _on_plane(c):
    return 1 if c == math.floor(c) else 0


@numba.njit(cache=True, nogil=True)
def _cell(c, n):
    i = int(math.floor(c))
    if i < 0:
        return 0
    if i > n - 1:
        return n - 1
    return i


@numba.njit(cache=True, nogil=True)
def _touch(ix, iy, iz, weight, mode, tag, unit_step, counts, stamp, mask, volume, acc):
    """Voxel intérieur d'un tronçon"""
    if mode == MODE_COUNT:
        if stamp[iz, iy, ix] != tag:
            stamp[iz, iy, ix] = tag
            counts[iz, iy, ix] += 1
    elif mode == MODE_CARVE:
        mask[iz, iy, ix] = 0
    elif mode == MODE_CHORD:
        acc += volume[iz, iy, ix] * weight
    elif weight > 0.0:
        acc += volume[iz, iy, ix] * unit_step
    return acc


@numba.njit(cache=True, nogil=True)
def _step_walk(x0, y0, z0, x1, y1, z1, nx, ny, nz, vx, vy, vz, mode, tag, unit_step,
               out, lens, counts, stamp, mask, volume):
    """
    Même résultat que _walk pour les modes comptage, découpe et intégration.

    Les indices du voxel courant avancent d'un plan à chaque franchissement ;
    le point de franchissement ne repasse par _visit que s'il est sur une
    arête ou un coin (au moins deux coordonnées entières). Les contacts
    n'apportent rien aux intégrales. Un segment posé sur un plan de la
    grille, ou réduit à un point, est confié à _walk. Renvoie la somme.
    """
    dx = x1 - x0
    dy = y1 - y0
    dz = z1 - z0
    if ((dx == 0.0 and _on_plane(x0)) or (dy == 0.0 and _on_plane(y0))
            or (dz == 0.0 and _on_plane(z0))):
        _, acc = _walk(x0, y0, z0, x1, y1, z1, nx, ny, nz, vx, vy, vz, mode, tag, unit_step,
                       out, lens, counts, stamp, mask, volume)
        return acc

    t_enter, t_exit = _clip(x0, y0, z0, dx, dy, dz, nx, ny, nz)
    if t_enter > t_exit:
        return 0.0
    if t_enter == t_exit:
        _, acc = _walk(x0, y0, z0, x1, y1, z1, nx, ny, nz, vx, vy, vz, mode, tag, unit_step,
                       out, lens, counts, stamp, mask, volume)
        return acc

    length = math.sqrt((dx * vx) ** 2 + (dy * vy) ** 2 + (dz * vz) ** 2)
    sx = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
    sy = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
    sz = 1 if dz > 0.0 else (-1 if dz < 0.0 else 0)

    kx = 0.0
    ky = 0.0
    kz = 0.0
    tx = np.inf
    ty = np.inf
    tz = np.inf
    if sx != 0:
        kx = _first_plane(x0 + t_enter * dx, x0, dx, t_enter)
        tx = (kx - x0) / dx
    if sy != 0:
        ky = _first_plane(y0 + t_enter * dy, y0, dy, t_enter)
        ty = (ky - y0) / dy
    if sz != 0:
        kz = _first_plane(z0 + t_enter * dz, z0, dz, t_enter)
        tz = (kz - z0) / dz

    # Voxel du premier tronçon : celui qui contient son milieu
    t_first = min(t_exit, min(tx, min(ty, tz)))
    tm = 0.5 * (t_enter + t_first)
    ix = _cell(x0 + tm * dx, nx)
    iy = _cell(y0 + tm * dy, ny)
    iz = _cell(z0 + tm * dz, nz)

    contacts = mode == MODE_COUNT or mode == MODE_CARVE
    acc = 0.0
    if contacts:
        _visit(_clamp(x0 + t_enter * dx, nx), _clamp(y0 + t_enter * dy, ny),
               _clamp(z0 + t_enter * dz, nz), nx, ny, nz, sx, sy, sz, 0.0,
               mode, tag, unit_step, out, lens, 0, counts, stamp, mask, volume, acc)

    t_prev = t_enter
    for _ in range(nx + ny + nz + 3):
        t_next = min(tx, min(ty, tz))
        if t_next >= t_exit:
            break
        acc = _touch(ix, iy, iz, (t_next - t_prev) * length, mode, tag, unit_step,
                     counts, stamp, mask, volume, acc)

        if contacts:
            cx = kx if tx == t_next else _clamp(x0 + t_next * dx, nx)
            cy = ky if ty == t_next else _clamp(y0 + t_next * dy, ny)
            cz = kz if tz == t_next else _clamp(z0 + t_next * dz, nz)
            if _on_plane(cx) + _on_plane(cy) + _on_plane(cz) >= 2:
                _visit(cx, cy, cz, nx, ny, nz, sx, sy, sz, 0.0,
                       mode, tag, unit_step, out, lens, 0, counts, stamp, mask, volume, acc)

        if tx == t_next:
            ix += sx
            kx += sx
            tx = (kx - x0) / dx
        if ty == t_next:
            iy += sy
            ky += sy
            ty = (ky - y0) / dy
        if tz == t_next:
            iz += sz
            kz += sz
            tz = (kz - z0) / dz
        t_prev = t_next

    if t_exit > t_prev:
        acc = _touch(ix, iy, iz, (t_exit - t_prev) * length, mode, tag, unit_step,
                     counts, stamp, mask, volume, acc)
    if contacts:
        _visit(_clamp(x0 + t_exit * dx, nx), _clamp(y0 + t_exit * dy, ny),
               _clamp(z0 + t_exit * dz, nz), nx, ny, nz, sx, sy, sz, 0.0,
               mode, tag, unit_step, out, lens, 0, counts, stamp, mask, volume, acc)
    return acc


@numba.njit(cache=True, nogil=True)
def _dummies():
    return (np.zeros((1, 1, 1), dtype=np.int64), np.zeros((1, 1, 1), dtype=np.int64),
            np.zeros((1, 1, 1), dtype=np.uint8), np.zeros((1, 1, 1), dtype=np.float64))


@numba.njit(cache=True, nogil=True)
def trace_segment(x0, y0, z0, x1, y1, z1, nx, ny, nz, vx, vy, vz, out, lens):
    """
    Remplit out[:n] avec les indices (ix, iy, iz) dans l'ordre d'entrée vers
    sortie et lens[:n] avec la longueur d'intersection en mm (0 pour un simple
    contact). Renvoie n.
    """
    counts, stamp, mask, volume = _dummies()
    n, _ = _walk(x0, y0, z0, x1, y1, z1, nx, ny, nz, vx, vy, vz, MODE_LIST, 0, 0.0,
                 out, lens, counts, stamp, mask, volume)
    return n


@numba.njit(cache=True, nogil=True)
def accumulate_counts(entries, exits, counts, vx, vy, vz):
    """Incrémente counts[iz, iy, ix] une fois par segment touchant le voxel"""
    nz, ny, nx = counts.shape
    stamp = np.full(counts.shape, -1, dtype=np.int64)
    out = np.empty((1, 3), dtype=np.int64)
    lens = np.empty(1, dtype=np.float64)
    _, _, mask, volume = _dummies()
    for i in range(entries.shape[0]):
        _step_walk(entries[i, 0], entries[i, 1], entries[i, 2], exits[i, 0], exits[i, 1], exits[i, 2],
                   nx, ny, nz, vx, vy, vz, MODE_COUNT, i, 0.0, out, lens, counts, stamp, mask, volume)


@numba.njit(cache=True, nogil=True)
def carve_segments(entries, exits, mask, vx, vy, vz):
    """Met à zéro les voxels du masque touchés par les segments"""
    nz, ny, nx = mask.shape
    out = np.empty((1, 3), dtype=np.int64)
    lens = np.empty(1, dtype=np.float64)
    counts, stamp, _, volume = _dummies()
    for i in range(entries.shape[0]):
        _step_walk(entries[i, 0], entries[i, 1], entries[i, 2], exits[i, 0], exits[i, 1], exits[i, 2],
                   nx, ny, nz, vx, vy, vz, MODE_CARVE, i, 0.0, out, lens, counts, stamp, mask, volume)


@numba.njit(cache=True, nogil=True)
def integrate_segments(entries, exits, volume, vx, vy, vz, unit_step, result):
    """
    Somme du volume le long de chaque segment.

    unit_step > 0 : chaque voxel intersecté (longueur > 0) compte pour unit_step mm.
    unit_step <= 0 : pondération par la longueur d'intersection exacte.
    """
    nz, ny, nx = volume.shape
    mode = MODE_UNIT if unit_step > 0.0 else MODE_CHORD
    out = np.empty((1, 3), dtype=np.int64)
    lens = np.empty(1, dtype=np.float64)
    counts, stamp, mask, _ = _dummies()
    for i in range(entries.shape[0]):
        result[i] = _step_walk(entries[i, 0], entries[i, 1], entries[i, 2],
                               exits[i, 0], exits[i, 1], exits[i, 2],
                               nx, ny, nz, vx, vy, vz, mode, i, unit_step, out, lens,
                               counts, stamp, mask, volume)
