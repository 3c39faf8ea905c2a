"""Hilfsfunktionen für Polylinien (Nx3-Arrays in Metern)"""
from typing import Iterable, Tuple

import numpy as np

# Knoten, die näher beieinander liegen, gelten als Duplikat
DUPLICATE_EPS = 1e-6


def as_points(points: Iterable) -> np.ndarray:
    """Wandelt eine Punktliste in ein (N, 3) float64-Array"""
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return np.zeros((0, 3), dtype=np.float64)
    return arr.reshape(-1, 3)


def path_length(points) -> float:
    """Summe der Abstände aufeinanderfolgender Punkte; 0 für einen Punkt"""
    pts = as_points(points)
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def resample_segment(a: np.ndarray, b: np.ndarray, spacing: float) -> np.ndarray:
    """
    Tastet die Strecke [a, b] mit höchstens `spacing` Abstand ab.

    Returns:
        Punkte inklusive a und b. Bei a == b nur a.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dist = float(np.linalg.norm(b - a))
    if dist < DUPLICATE_EPS:
        return a.reshape(1, 3).copy()
    count = max(1, int(np.ceil(dist / spacing - 1e-9)))
    t = np.linspace(0.0, 1.0, count + 1)[:, None]
    return a + t * (b - a)


def resample_polyline(points, spacing: float) -> np.ndarray:
    """Tastet jedes Segment mit `spacing` ab, Eckpunkte bleiben erhalten"""
    pts = dedupe(points)
    if len(pts) < 2:
        return pts
    pieces = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        pieces.append(resample_segment(a, b, spacing)[1:])
    return np.vstack(pieces)


def dedupe(points) -> np.ndarray:
    """Entfernt direkt aufeinanderfolgende Duplikate"""
    pts = as_points(points)
    if len(pts) < 2:
        return pts.copy()
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(pts, axis=0), axis=1) >= DUPLICATE_EPS
    return pts[keep]


def arc_lengths(points) -> np.ndarray:
    """Kumulierte Bogenlänge je Punkt (erster Punkt: 0)"""
    pts = as_points(points)
    if len(pts) == 0:
        return np.zeros(0)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate(([0.0], np.cumsum(seg)))


def closest_arc_length(points, p) -> Tuple[float, np.ndarray]:
    """
    Bogenlänge und Lage des Polylinienpunkts, der p am nächsten liegt.

    Returns:
        (s, punkt) mit s als Bogenlänge ab dem ersten Punkt
    """
    pts = as_points(points)
    p = np.asarray(p, dtype=np.float64)
    if len(pts) == 1:
        return 0.0, pts[0].copy()
    a = pts[:-1]
    d = pts[1:] - a
    seg_len_sq = np.einsum("ij,ij->i", d, d)
    safe = np.where(seg_len_sq > 0.0, seg_len_sq, 1.0)
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / safe, 0.0, 1.0)
    t = np.where(seg_len_sq > 0.0, t, 0.0)
    foot = a + t[:, None] * d
    dist = np.linalg.norm(foot - p, axis=1)
    k = int(np.argmin(dist))
    s = arc_lengths(pts)
    return float(s[k] + t[k] * np.sqrt(seg_len_sq[k])), foot[k]


def point_at_arc_length(points, s: float) -> np.ndarray:
    """Punkt bei Bogenlänge s, auf [0, Gesamtlänge] geklemmt"""
    pts = as_points(points)
    if len(pts) == 1:
        return pts[0].copy()
    cum = arc_lengths(pts)
    s = float(np.clip(s, 0.0, cum[-1]))
    k = int(np.searchsorted(cum, s, side="right") - 1)
    k = min(max(k, 0), len(pts) - 2)
    seg = cum[k + 1] - cum[k]
    if seg <= 0.0:
        return pts[k + 1].copy()
    t = (s - cum[k]) / seg
    return pts[k] + t * (pts[k + 1] - pts[k])


def sample_along(points, spacing: float) -> np.ndarray:
    """Punkte im Bogenlängenabstand `spacing` inklusive Endpunkt"""
    pts = as_points(points)
    total = path_length(pts)
    if len(pts) < 2 or total <= 0.0:
        return pts[:1].copy()
    count = max(1, int(np.ceil(total / spacing - 1e-9)))
    return np.array([point_at_arc_length(pts, s) for s in np.linspace(0.0, total, count + 1)])


def sub_path(points, s0: float, s1: float) -> np.ndarray:
    """Abschnitt zwischen den Bogenlängen s0 und s1 (geklemmt), Randpunkte interpoliert"""
    pts = as_points(points)
    if len(pts) < 2:
        return pts.copy()
    cum = arc_lengths(pts)
    s0 = float(np.clip(s0, 0.0, cum[-1]))
    s1 = float(np.clip(s1, s0, cum[-1]))
    inner = pts[(cum > s0) & (cum < s1)]
    return np.vstack((point_at_arc_length(pts, s0), inner, point_at_arc_length(pts, s1)))
