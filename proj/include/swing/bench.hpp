#pragma once

// Experiment harness: synthetic clouds, OFF meshes and vertex normals, FNE and
// timing sweeps comparing GRF on a materialized W against SWING, and the CSV
// format the sweeps emit.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "swing/igraph.hpp"
#include "swing/swing.hpp"

namespace swing {

/// (pi N / 6)^{1/3}: the half-width giving one expected point per unit ball.
double synthetic_half_width(Index n);

/// N points i.i.d. uniform on [-h, h]^3 with h = synthetic_half_width(N).
PointCloud gen_synthetic_cloud(Index n, std::uint64_t seed);

using Face = std::array<Index, 3>;

struct Mesh {
  Matrix vertices;  // N x 3
  std::vector<Face> faces;
  Matrix normals;   // N x 3, unit rows

  Index size() const { return vertices.rows(); }
};

/// OFF or NOFF text. Polygons are fan-triangulated; normals come from the
/// file (NOFF) or compute_vertex_normals. Throws ParseError with the line.
Mesh parse_off(std::istream& in);
Mesh load_mesh_off(const std::filesystem::path& path);
void write_off(std::ostream& out, const Mesh& mesh);

/// Area-weighted average of incident face normals, normalized. Isolated or
/// fully degenerate vertices get (0, 0, 1).
Matrix compute_vertex_normals(const Matrix& vertices, const std::vector<Face>& faces);

/// Convex hull of a point set in R^3 with outward-oriented triangles.
std::vector<Face> convex_hull_faces(const Matrix& points);

/// N Fibonacci points on the unit sphere, triangulated by their convex hull.
Mesh make_sphere_mesh(Index n);

/// Unit icosahedron (12 vertices, 20 faces).
Mesh make_icosahedron();

/// Vertices centered at their mean and scaled to unit RMS radius.
Matrix normalized_mesh_coordinates(const Mesh& mesh);

struct SweepRow {
  std::string method;  // "grf" or "swing"
  std::string kernel;  // e.g. "diffusion:0.5"
  Index n = 0;
  Index r = 0;  // 0 for GRF
  int m = 0;
  double p_halt = 0.0;
  std::optional<double> fne;  // empty for timing rows
  double seconds = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  bool operator==(const SweepResult&) const = default;
};

/// Header row then one line per row, RFC 4180 quoting, doubles printed with
/// enough digits to round-trip.
void write_csv(std::ostream& out, const SweepResult& result);
SweepResult read_csv(std::istream& in);

/// Feature and walk settings shared by the sweeps and the mesh experiment.
struct SwingSettings {
  FeatureKind phi_kind = FeatureKind::fourier;
  FeatureKind psi_kind = FeatureKind::positive;
  std::optional<double> importance_scale = 2.0;
  bool orthogonal = true;
  double temperature = 1.0;
  WalkLengthMode length_mode = WalkLengthMode::per_walk;
};

SwingConfig make_swing_config(const SwingSettings& settings, const WalkConfig& walk, Index r);

struct FneSweepConfig {
  std::vector<std::string> kernels = {"diffusion:0.5", "pstep:2:1", "dreg:0.05"};
  std::vector<Index> n_list = {200};
  std::vector<Index> r_list = {8, 16, 32, 64, 128, 256, 512};
  int m = 300;
  double p_halt = 0.3;
  std::uint64_t seed = 0;
  double bandwidth = 1.0;  // Gaussian f
  int truncation = 30;
  Index oracle_cap = 2000;
  SwingSettings swing;
  // Runs the SWING rows of each (kernel, N) concurrently, each on one thread.
  // Rows are identical either way; their timings are not clean.
  bool parallel_rows = false;
};

/// One GRF row and one SWING row per r for every (kernel, N); GRF does not
/// depend on r. W includes
/// self loops so that both methods target the same matrix.
SweepResult fne_sweep(const FneSweepConfig& cfg);

struct TimeSweepConfig {
  std::string kernel = "diffusion:0.5";
  std::vector<Index> n_list = {1000, 2000, 5000, 10000};
  Index r = 64;
  int m = 8;
  double p_halt = 0.3;
  int repeats = 5;
  std::uint64_t seed = 0;
  double bandwidth = 1.0;
  SwingSettings swing;
};

/// Median wall-clock time of each pipeline after one discarded warm-up run,
/// single-threaded.
/// GRF: materialize W, walk both ensembles, one matvec. SWING: both
/// ensembles' walks and factors, one matvec.
SweepResult time_sweep(const TimeSweepConfig& cfg);

struct PowerLawFit {
  double exponent = 0.0;
  double prefactor = 0.0;
};

/// Least-squares fit of log y = log c + k log x.
PowerLawFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

struct NormalExperimentConfig {
  double lambda = 0.1;  // K = exp(lambda W)
  double sigma = 0.5;   // W = exp(-|x_i - x_j|^2 / sigma^2), unit RMS radius coordinates
  bool grid_search = false;
  double mask_fraction = 0.8;
  double p_halt = 0.1;
  int m = 200;
  Index r = 256;
  int truncation = 40;
  std::uint64_t seed = 0;
  std::vector<std::string> methods = {"bf", "grf", "swing"};
  SwingSettings swing;
};

struct NormalExperimentResult {
  double lambda = 0.0;
  double sigma = 0.0;
  Index masked = 0;
  std::optional<double> bf;
  std::optional<double> grf;
  std::optional<double> swing;
  double bf_seconds = 0.0;
  double grf_seconds = 0.0;
  double swing_seconds = 0.0;
};

/// Hides ceil(mask_fraction N) normals and predicts each as
/// sum_j K(i, j) F_j over the visible vertices; reports the mean cosine
/// similarity per method (zero predictions score 0).
NormalExperimentResult normal_prediction_experiment(const Mesh& mesh,
                                                    const NormalExperimentConfig& cfg);

/// Mean cosine similarity of predicted rows against reference rows over `rows`.
double mean_cosine(const Matrix& predicted, const Matrix& reference,
                   const std::vector<Index>& rows);

}  // namespace swing
