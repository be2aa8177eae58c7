from dataclasses import dataclass


@dataclass
class NuggetConfig:
    # Relative tolerance for treating a matrix as symmetric
    symmetry_tol: float = 1e-12

    # Cyclic Jacobi: maximum sweeps and the off-diagonal stopping threshold,
    # relative to n times the Frobenius norm of the input
    jacobi_max_sweeps: int = 100
    jacobi_tol: float = 1e-15

    # Eigenvalues below this fraction of max|λ| are treated as zero by
    # pseudoinverses and Gaussian sampling
    pinv_rel_tol: float = 1e-10

    # Absolute threshold used to call an eigenvalue "non-zero"
    zero_eig_tol: float = 1e-10

    # Linear systems with a larger condition number are rejected
    max_condition: float = 1e12

    # How many times we redraw a graph before giving up on connectivity
    connect_max_attempts: int = 1000

    # Graphical lasso block coordinate descent
    glasso_tol: float = 1e-6
    glasso_max_sweeps: int = 500
    glasso_inner_tol: float = 1e-12
    glasso_inner_max_iter: int = 10_000
    glasso_jitter: float = 1e-6


_config = NuggetConfig()


def configure(config: NuggetConfig):
    global _config
    _config = config


def get_config() -> NuggetConfig:
    return _config
