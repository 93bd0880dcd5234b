"""Laplacian eigenfunctions on masked grids."""
from .domain import GridDomain, annulus, from_name, full_square, l_shape, load_mask, save_mask, unit_square
from .operator import GridField, Stencil, apply_neg_laplacian, closed_form_square_eig
from .flow import FlowConfig, GridEigenpair, flow_step, solve_eigenfunctions
