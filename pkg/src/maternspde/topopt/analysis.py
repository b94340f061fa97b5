"""Post-processing of optimized designs: thresholding and connectivity."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..mesh import Mesh


def solid_elements(mesh: Mesh, rho_nodal, threshold: float = 0.5) -> np.ndarray:
    """Boolean mask of elements whose mean nodal density reaches ``threshold``."""
    return np.asarray(rho_nodal)[mesh.elements].mean(axis=1) >= threshold


def design_difference(mesh: Mesh, rho_a, rho_b, threshold: float = 0.5) -> float:
    """Fraction of elements on which two thresholded designs disagree."""
    return float(np.mean(solid_elements(mesh, rho_a, threshold)
                         != solid_elements(mesh, rho_b, threshold)))


def _edge_adjacency(mesh: Mesh, mask) -> sp.csr_matrix:
    e = mesh.elements
    nv = e.shape[1]
    if nv == 2:
        # segments touch through shared nodes
        pairs = e[:, :, None]
    else:
        pairs = np.stack([e, np.roll(e, -1, axis=1)], axis=2)
    key = np.sort(pairs, axis=2).reshape(-1, pairs.shape[2])
    owner = np.repeat(np.arange(len(e)), pairs.shape[1])
    keep = mask[owner]
    key, owner = key[keep], owner[keep]
    _, face_id = np.unique(key, axis=0, return_inverse=True)
    B = sp.csr_matrix((np.ones(len(owner)), (owner, face_id.ravel())),
                      shape=(len(e), face_id.max() + 1 if len(face_id) else 0))
    return (B @ B.T).tocsr()


def support_component(mesh: Mesh, rho_nodal, support_attr: int,
                      threshold: float = 0.5) -> np.ndarray:
    """Mask of solid elements connected (through shared edges) to the support.

    An element belongs to the support if it has a node on a boundary face
    with ``support_attr``.
    """
    solid = solid_elements(mesh, rho_nodal, threshold)
    adj = _edge_adjacency(mesh, solid)
    _, labels = connected_components(adj, directed=False)
    support_nodes = mesh.boundary_nodes([support_attr])
    touches = np.isin(mesh.elements, support_nodes).any(axis=1) & solid
    roots = np.unique(labels[touches])
    return solid & np.isin(labels, roots)
