"""Vectorised BSDFs: Lambertian, GGX rough conductor, smooth mirror and smooth dielectric.

All directions are world-space unit vectors pointing away from the surface.
``n`` is the shading normal already flipped to the side of ``wo``. Each
function takes a material-id array and dispatches per material type.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dfguide.render.scene import CONDUCTOR, DIELECTRIC, DIFFUSE, MIRROR, Materials

INV_PI = 1.0 / np.pi
MIN_ALPHA = 1e-3


def dot(a, b):
    return np.einsum("ij,ij->i", a, b)


def frame(n: np.ndarray):
    """Orthonormal tangents for unit normals (branchless construction)."""
    sign = np.where(n[:, 2] >= 0.0, 1.0, -1.0)
    a = -1.0 / (sign + n[:, 2])
    b = n[:, 0] * n[:, 1] * a
    t = np.stack([1.0 + sign * n[:, 0] ** 2 * a, sign * b, -sign * n[:, 0]], axis=1)
    s = np.stack([b, sign + n[:, 1] ** 2 * a, -n[:, 1]], axis=1)
    return t, s


def to_world(local, n):
    t, s = frame(n)
    return local[:, :1] * t + local[:, 1:2] * s + local[:, 2:3] * n


def reflect(w, n):
    return 2.0 * dot(w, n)[:, None] * n - w


def ggx_alpha(roughness):
    return np.maximum(np.asarray(roughness) ** 2, MIN_ALPHA)


def ggx_d(cos_h, alpha):
    a2 = alpha * alpha
    c2 = cos_h * cos_h
    return a2 / (np.pi * (c2 * (a2 - 1.0) + 1.0) ** 2)


def ggx_g1(cos_w, alpha):
    a2 = alpha * alpha
    c = np.maximum(cos_w, 1e-12)
    return 2.0 * c / (c + np.sqrt(a2 + (1.0 - a2) * c * c))


def schlick(f0, cos):
    return f0 + (1.0 - f0) * ((1.0 - np.clip(cos, 0.0, 1.0)) ** 5)[:, None]


def fresnel_dielectric(cos_i, eta):
    """Unpolarised Fresnel reflectance; ``eta = n_t / n_i``. Total internal reflection gives 1."""
    sin2_t = (1.0 - cos_i * cos_i) / (eta * eta)
    tir = sin2_t >= 1.0
    cos_t = np.sqrt(np.maximum(1.0 - sin2_t, 0.0))
    rs = (cos_i - eta * cos_t) / (cos_i + eta * cos_t)
    rp = (eta * cos_i - cos_t) / (eta * cos_i + cos_t)
    return np.where(tir, 1.0, 0.5 * (rs * rs + rp * rp)), cos_t


def _conductor_eval(mats, mid, n, wo, wi):
    co = dot(n, wo)
    ci = dot(n, wi)
    h = wo + wi
    h /= np.maximum(np.linalg.norm(h, axis=1, keepdims=True), 1e-300)
    alpha = ggx_alpha(mats.roughness[mid])
    d = ggx_d(dot(n, h), alpha)
    g = ggx_g1(co, alpha) * ggx_g1(ci, alpha)
    f = schlick(mats.f0[mid], dot(wi, h))
    val = f * (d * g / (4.0 * np.maximum(co * ci, 1e-12)))[:, None]
    ok = (co > 0) & (ci > 0)
    return np.where(ok[:, None], val, 0.0)


def _conductor_pdf(mats, mid, n, wo, wi):
    h = wo + wi
    h /= np.maximum(np.linalg.norm(h, axis=1, keepdims=True), 1e-300)
    alpha = ggx_alpha(mats.roughness[mid])
    ch = dot(n, h)
    oh = np.abs(dot(wo, h))
    pdf = ggx_d(ch, alpha) * ch / (4.0 * np.maximum(oh, 1e-12))
    ok = (dot(n, wi) > 0) & (dot(n, wo) > 0) & (ch > 0)
    return np.where(ok, pdf, 0.0)


def bsdf_eval(mats: Materials, mid, n, wo, wi) -> np.ndarray:
    """``f_s(wo, wi)`` as RGB; zero for delta materials and for ``wi`` below the surface."""
    out = np.zeros((len(mid), 3))
    kind = mats.kind[mid]
    sel = kind == DIFFUSE
    if np.any(sel):
        ok = (dot(n[sel], wi[sel]) > 0) & (dot(n[sel], wo[sel]) > 0)
        out[sel] = np.where(ok[:, None], mats.albedo[mid[sel]] * INV_PI, 0.0)
    sel = kind == CONDUCTOR
    if np.any(sel):
        out[sel] = _conductor_eval(mats, mid[sel], n[sel], wo[sel], wi[sel])
    return out


def bsdf_pdf(mats: Materials, mid, n, wo, wi) -> np.ndarray:
    """Solid-angle density of :func:`bsdf_sample`; zero for delta materials."""
    out = np.zeros(len(mid))
    kind = mats.kind[mid]
    sel = kind == DIFFUSE
    if np.any(sel):
        out[sel] = np.maximum(dot(n[sel], wi[sel]), 0.0) * INV_PI * (dot(n[sel], wo[sel]) > 0)
    sel = kind == CONDUCTOR
    if np.any(sel):
        out[sel] = _conductor_pdf(mats, mid[sel], n[sel], wo[sel], wi[sel])
    return out


@dataclass
class BsdfSample:
    wi: np.ndarray
    weight: np.ndarray  # f * |cos| / pdf (RGB)
    pdf: np.ndarray  # solid angle; 0 for delta lobes
    delta: np.ndarray


def bsdf_sample(mats: Materials, mid, n, wo, u: np.ndarray, front=None) -> BsdfSample:
    """Importance-sample ``wi``. ``u`` is ``(N, 2)`` or ``(N, 3)`` in [0, 1).

    ``front`` tells whether ``wo`` lies on the side the geometric normal points
    to (needed only by the dielectric to pick the index ratio).
    """
    count = len(mid)
    wi = np.zeros((count, 3))
    weight = np.zeros((count, 3))
    pdf = np.zeros(count)
    kind = mats.kind[mid]
    delta = (kind == MIRROR) | (kind == DIELECTRIC)

    sel = kind == DIFFUSE
    if np.any(sel):
        u1, u2 = u[sel, 0], u[sel, 1]
        r = np.sqrt(u1)
        phi = 2.0 * np.pi * u2
        local = np.stack([r * np.cos(phi), r * np.sin(phi), np.sqrt(np.maximum(1.0 - u1, 0.0))], axis=1)
        w = to_world(local, n[sel])
        wi[sel] = w
        p = np.maximum(dot(w, n[sel]), 0.0) * INV_PI
        pdf[sel] = p
        weight[sel] = np.where((p > 0)[:, None], mats.albedo[mid[sel]], 0.0)

    sel = kind == CONDUCTOR
    if np.any(sel):
        m = mid[sel]
        alpha = ggx_alpha(mats.roughness[m])
        u1, u2 = u[sel, 0], u[sel, 1]
        tan2 = alpha * alpha * u1 / np.maximum(1.0 - u1, 1e-12)
        cos_h = 1.0 / np.sqrt(1.0 + tan2)
        sin_h = np.sqrt(np.maximum(1.0 - cos_h * cos_h, 0.0))
        phi = 2.0 * np.pi * u2
        h = to_world(np.stack([sin_h * np.cos(phi), sin_h * np.sin(phi), cos_h], axis=1), n[sel])
        w = reflect(wo[sel], h)
        wi[sel] = w
        p = _conductor_pdf(mats, m, n[sel], wo[sel], w)
        f = _conductor_eval(mats, m, n[sel], wo[sel], w)
        pdf[sel] = p
        ci = np.maximum(dot(n[sel], w), 0.0)
        weight[sel] = np.where((p > 0)[:, None], f * (ci / np.where(p > 0, p, 1.0))[:, None], 0.0)

    sel = kind == MIRROR
    if np.any(sel):
        wi[sel] = reflect(wo[sel], n[sel])
        weight[sel] = mats.albedo[mid[sel]]

    sel = kind == DIELECTRIC
    if np.any(sel):
        m = mid[sel]
        ns, wos = n[sel], wo[sel]
        entering = np.ones(len(m), dtype=bool) if front is None else np.asarray(front)[sel]
        eta = np.where(entering, mats.ior[m], 1.0 / mats.ior[m])
        cos_o = np.clip(dot(ns, wos), 0.0, 1.0)
        fr, cos_t = fresnel_dielectric(cos_o, eta)
        choose_r = u[sel, 2 if u.shape[1] > 2 else 0] < fr
        refl = reflect(wos, ns)
        refr = (-wos / eta[:, None]) + (cos_o / eta - cos_t)[:, None] * ns
        refr /= np.maximum(np.linalg.norm(refr, axis=1, keepdims=True), 1e-300)
        wi[sel] = np.where(choose_r[:, None], refl, refr)
        weight[sel] = 1.0
    return BsdfSample(wi, weight, pdf, delta)
