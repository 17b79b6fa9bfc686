"""Per-detector log-likelihood profiles in the arrival time.

The joint log-likelihood splits as ``ln L(theta) = sum_j f_j(tau_j(theta))`` with

    f_j(tau) = sum_{t_i > tau} log(1 + lambda_j(t_i - tau) / lambda0) - n * Lambda_j(T - tau)

Direct evaluation of f_j touches every event (millions at desk scale), so the
estimators use two cheaper views of the same function:

* :class:`BinnedProfile` -- events histogrammed on a uniform grid and
  correlated with the log-ratio kernel by FFT.  Approximate; only used to
  locate maxima.
* :class:`LocalProfile` -- on a short window ``[lo, hi]`` events close to the
  window are summed exactly per query while the far events, whose terms are
  analytic in tau there, are represented by a Chebyshev interpolant whose
  accuracy is checked against direct sums before use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.signal import fftconvolve

from .signal_model import PowerLaw

CHEB_DEGREE = 14
CHEB_ABS_TOL = 1e-7
CHEB_REL_TOL = 1e-12
FAR_GAP_FACTOR = 4.0
NEAR_TARGET = 100
MAX_PIECES = 64


class DetectorProfile:
    """Exact f_j for one detector path."""

    def __init__(self, events, shape, lambda0: float, n: float, T: float):
        self.events = np.asarray(events, dtype=float)
        self.shape = shape
        self.lambda0 = float(lambda0)
        self.n = float(n)
        self.T = float(T)

    def log_ratio(self, s):
        return self.shape.log_ratio(s, self.lambda0)

    def compensator(self, tau):
        """``n * int_tau^T lambda(t - tau) dt`` (array in, array out)."""
        tau = np.asarray(tau, dtype=float)
        return self.n * self.shape.integral(self.T - tau)

    def event_sum(self, tau: float, upto: float = math.inf) -> float:
        e = self.events
        i0 = np.searchsorted(e, tau, side="right")
        i1 = e.size if upto == math.inf else np.searchsorted(e, upto, side="left")
        if i1 <= i0:
            return 0.0
        return float(np.sum(self.log_ratio(e[i0:i1] - tau)))

    def __call__(self, tau: float) -> float:
        return self.event_sum(tau) - float(self.compensator(np.array([tau]))[0])

    def many(self, taus) -> np.ndarray:
        return np.array([self(t) for t in np.ravel(taus)])

    def binned(self, lo: float, hi: float, h: float) -> "BinnedProfile":
        return BinnedProfile.build(self, lo, hi, h)

    def local(self, lo: float, hi: float) -> "LocalProfile":
        return LocalProfile.build(self, lo, hi)


@dataclass
class BinnedProfile:
    taus: np.ndarray
    values: np.ndarray

    @classmethod
    def build(cls, prof: DetectorProfile, lo: float, hi: float, h: float) -> "BinnedProfile":
        lo = max(lo, 0.0)
        m = int(math.ceil((hi - lo) / h)) + 1
        taus = lo + h * np.arange(m)
        e = prof.events[prof.events > lo]
        nb = int(math.ceil((prof.T - lo) / h)) + 1
        counts = np.bincount(((e - lo) / h).astype(np.int64), minlength=nb)[:nb].astype(float)
        # an event in bin i contributes g((i - m + 1/2) h) to f(tau_m) when i >= m
        kernel = prof.log_ratio((np.arange(nb) + 0.5) * h)
        corr = fftconvolve(counts, kernel[::-1], mode="full")[nb - 1 : 2 * nb - 1]
        vals = corr[:m] - prof.compensator(taus)
        return cls(taus=taus, values=vals)

    def __call__(self, tau):
        return np.interp(tau, self.taus, self.values)


def _cheb_sum(prof, events, lo, hi):
    """Chebyshev interpolant of ``sum_i g(t_i - tau)`` on [lo, hi] and its checked error."""

    def total(taus):
        return np.array([np.sum(prof.log_ratio(events - t)) for t in np.atleast_1d(taus)])

    fit = C.Chebyshev.interpolate(total, CHEB_DEGREE, domain=[lo, hi])
    probe = lo + (hi - lo) * np.array([0.137, 0.5 + 1e-3, 0.911])
    err = float(np.max(np.abs(fit(probe) - total(probe))))
    scale = float(np.sum(np.abs(prof.log_ratio(events - hi))))
    return fit, err, err <= CHEB_ABS_TOL + CHEB_REL_TOL * scale


class _Piece:
    __slots__ = ("lo", "hi", "near", "fit")

    def __init__(self, lo, hi, near, fit):
        self.lo, self.hi, self.near, self.fit = lo, hi, near, fit


@dataclass
class LocalProfile:
    prof: DetectorProfile
    lo: float
    hi: float
    pieces: list
    far_fit: object = None
    comp_fit: object = None
    exact_only: bool = False
    stats: dict = field(default_factory=dict)

    @classmethod
    def build(cls, prof: DetectorProfile, lo: float, hi: float, near_target: int = NEAR_TARGET) -> "LocalProfile":
        """Events past ``hi + 4 * width`` go into one interpolant for the whole
        window; the remaining ones are split again over sub-windows so each
        query sums about ``near_target`` events directly."""
        width = max(hi - lo, 1e-12)
        e = prof.events
        cut = hi + FAR_GAP_FACTOR * width
        i_cut = np.searchsorted(e, cut, side="left")
        far = e[i_cut:]
        self = cls(prof=prof, lo=lo, hi=hi, pieces=[])
        ok = True
        errs = []
        if far.size:
            self.far_fit, err, good = _cheb_sum(prof, far, lo, hi)
            ok &= good
            errs.append(err)
        mid = e[np.searchsorted(e, lo, side="right"):i_cut]
        npieces = int(min(MAX_PIECES, max(1, mid.size // near_target)))
        edges = np.linspace(lo, hi, npieces + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            sub_cut = b + FAR_GAP_FACTOR * (b - a) if npieces > 1 else cut
            sub_cut = min(sub_cut, cut)
            near = mid[(mid > a) & (mid < sub_cut)]
            rest = mid[mid >= sub_cut]
            fit = None
            if rest.size:
                fit, err, good = _cheb_sum(prof, rest, a, b)
                ok &= good
                errs.append(err)
            self.pieces.append(_Piece(a, b, near, fit))
        self.exact_only = not ok
        if not isinstance(prof.shape, PowerLaw):
            self.comp_fit = C.Chebyshev.interpolate(prof.compensator, CHEB_DEGREE, domain=[lo, hi])
        self.stats = {"far_events": int(far.size), "pieces": npieces, "cheb_err": max(errs, default=0.0)}
        return self

    def _near_sum(self, piece: _Piece, taus: np.ndarray) -> np.ndarray:
        near = piece.near
        out = np.zeros(taus.size)
        if near.size == 0:
            return out
        for c0 in range(0, taus.size, 2048):
            t = taus[c0 : c0 + 2048]
            s = near[None, :] - t[:, None]
            pos = s > 0
            g = np.zeros_like(s)
            g[pos] = self.prof.log_ratio(s[pos])
            out[c0 : c0 + 2048] = g.sum(axis=1)
        return out

    def __call__(self, tau):
        scalar = np.ndim(tau) == 0
        taus = np.atleast_1d(np.asarray(tau, dtype=float))
        inside = (taus >= self.lo) & (taus <= self.hi)
        out = np.empty(taus.size)
        if self.exact_only:
            inside[:] = False
        if np.any(inside):
            ti = taus[inside]
            val = np.zeros(ti.size)
            npieces = len(self.pieces)
            idx = np.clip(((ti - self.lo) / (self.hi - self.lo) * npieces).astype(int), 0, npieces - 1)
            for p_i in np.unique(idx):
                sel = idx == p_i
                piece = self.pieces[p_i]
                v = self._near_sum(piece, ti[sel])
                if piece.fit is not None:
                    v = v + piece.fit(ti[sel])
                val[sel] = v
            if self.far_fit is not None:
                val = val + self.far_fit(ti)
            if self.comp_fit is None:
                val = val - self.prof.compensator(ti)
            else:
                val = val - self.comp_fit(ti)
            out[inside] = val
        if np.any(~inside):
            out[~inside] = self.prof.many(taus[~inside])
        return float(out[0]) if scalar else out
