/* C API of the shellforms shared library.
 *
 * All functions return shf_status; SHF_OK is 0. On failure a thread-local
 * message is available via shf_last_error(). Objects are opaque handles owned
 * by the caller and released with the matching _destroy function. The library
 * is safe to use from multiple threads as long as each handle is used by one
 * thread at a time.
 */
#ifndef SHELLFORMS_H
#define SHELLFORMS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum shf_status {
    SHF_OK = 0,
    SHF_ERR_INVALID_ARGUMENT = 1,
    SHF_ERR_PARSE = 2,
    SHF_ERR_DEGENERATE_CHART = 3,
    SHF_ERR_DERIVATIVE_UNAVAILABLE = 4,
    SHF_ERR_DEGENERATE_IMMERSION = 5,
    SHF_ERR_NOT_ISOMETRIC = 6,
    SHF_ERR_OUT_OF_THICKNESS = 7,
    SHF_ERR_NOT_COERCIVE = 8,
    SHF_ERR_BAD_GAMMA = 9,
    SHF_ERR_SHAPE_MISMATCH = 10,
    SHF_ERR_FRAME_MISMATCH = 11,
    SHF_ERR_SINGULAR_BLOCK = 12,
    SHF_ERR_NO_CONVERGENCE = 13,
    SHF_ERR_NOT_SPD = 14,
    SHF_ERR_NOT_CONVEX = 15,
    SHF_ERR_TOO_LARGE = 16,
    SHF_ERR_IO = 17,
    SHF_ERR_INTERNAL = 18
} shf_status;

const char* shf_status_name(shf_status status);
/* Message of the most recent failure on this thread ("" if none). */
const char* shf_last_error(void);

/* ------------------------------------------------------------------ charts */

typedef struct shf_chart shf_chart;

/* JSON descriptor, e.g. {"kind":"sphere-cap","radius":1.0}. */
shf_status shf_chart_create(const char* json_descriptor, shf_chart** out);
/* Sampled chart: n1*n2 nodes, row-major over (i1, i2), xyz interleaved. */
shf_status shf_chart_create_sampled(int n1, int n2,
                                    double lo1, double hi1, double lo2, double hi2,
                                    const double* xyz, shf_chart** out);
void shf_chart_destroy(shf_chart* chart);
/* Chart domain rectangle. */
shf_status shf_chart_domain(const shf_chart* chart, double* lo1, double* hi1,
                            double* lo2, double* hi2);

/* Convexity certificate of the shape operator over an n1 x n2 geometry grid:
 * convex flag and the two-sided bound C (IEEE infinity when not convex). */
shf_status shf_chart_convexity(const shf_chart* chart, int n1, int n2,
                               int* convex, double* bound_c);

/* ----------------------------------------------------------------- material */

typedef struct shf_law shf_law;

/* JSON descriptor, e.g. {"kind":"isotropic","mu":1.0,"lambda":1.0}. */
shf_status shf_law_create(const char* json_descriptor, shf_law** out);
void shf_law_destroy(shf_law* law);
/* Eigenvalue bounds over `samples` random (t,y) points (NotCoercive on failure). */
shf_status shf_law_verify_bounds(const shf_law* law, int samples, uint64_t seed,
                                 double* alpha, double* beta);

/* ------------------------------------------------------------ cell problems */

/* gamma: value >= 0 with is_inf == 0, or is_inf != 0 for the infinite regime. */
typedef struct shf_gamma {
    double value;
    int is_inf;
} shf_gamma;

typedef struct shf_cell_grid {
    int n_y;   /* even, in [4, 128] */
    int n_t;   /* >= 2 */
    int p_leg; /* >= 1, <= n_t */
} shf_cell_grid;

typedef struct shf_solver_opts {
    double tol;    /* relative residual, default 1e-10 when <= 0 */
    int max_iter;  /* default 10000 when <= 0 */
    int keep_g;    /* regime 0: keep the per-node field as unknowns */
} shf_solver_opts;

typedef struct shf_effective_form {
    double m[9];        /* row-major, dual-frame Voigt-2 */
    double m_ortho[9];  /* row-major, orthonormal-frame Voigt-2 */
    double residual;    /* worst CG relative residual over the basis solves */
    int iterations;     /* worst iteration count */
    double lambda_min;  /* eigenvalues of m */
    double lambda_max;
    double bound_c;     /* max(lambda_max, 1/lambda_min) */
} shf_effective_form;

/* Effective bending form at chart point (z1, z2). */
shf_status shf_effective_form_at(const shf_chart* chart, double z1, double z2,
                                 const shf_law* law, shf_gamma gamma,
                                 shf_cell_grid grid, shf_solver_opts opts,
                                 shf_effective_form* out);

/* --------------------------------------------------------------- energy ---- */

typedef enum shf_energy_source_kind {
    SHF_ENERGY_IDENTITY = 0,   /* u = xi */
    SHF_ENERGY_IMMERSION = 1,  /* data = xyz samples, 3 per node */
    SHF_ENERGY_QFIELD = 2      /* data = (q11, q22, q12) per node, dual frame */
} shf_energy_source_kind;

typedef struct shf_energy_report {
    int is_infinite;
    double value;
    double isometry_defect;
    double area;
    double max_solver_residual;
    int cache_solves;
    int cache_hits;
} shf_energy_report;

/* Bending energy over an n1 x n2 chart grid. `data` layout depends on kind
 * (NULL for identity). `integrand_out` (n1*n2, optional) receives the
 * unweighted integrand samples. A non-isometric immersion reports
 * is_infinite = 1 and returns SHF_OK. */
shf_status shf_bending_energy(const shf_chart* chart, int n1, int n2,
                              shf_energy_source_kind kind, const double* data,
                              double isometry_tol, const shf_law* law, shf_gamma gamma,
                              shf_cell_grid grid, shf_solver_opts opts,
                              shf_energy_report* report, double* integrand_out);

/* --------------------------------------------------------------- recovery -- */

/* Least-squares solution of the infinitesimal-bending system on an n1 x n2
 * grid. B holds (B11, B22, B12) per node; w_out (3 per node) receives the
 * minimal-norm solution. */
shf_status shf_recover(const shf_chart* chart, int n1, int n2, const double* B,
                       double tol, int max_iter, double* w_out,
                       double* rel_residual, int* iterations);

/* ------------------------------------------------------------ verification - */

typedef struct shf_check_opts {
    uint64_t seed;
    double solver_tol;          /* <= 0 for default 1e-10 */
    int max_iter;               /* <= 0 for default */
    int jobs;                   /* <= 0 for default 1 */
    const char* recovery_chart; /* NULL, "sphere-cap" or "flat" */
} shf_check_opts;

/* Runs the verification suite; *report receives the deterministic report text
 * (free with shf_string_free). *all_passed is 1 when every check passed. */
shf_status shf_check_run(shf_check_opts opts, char** report, int* all_passed);

void shf_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* SHELLFORMS_H */
