#include "swing/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "swing/error.hpp"
#include "swing/grf.hpp"
#include "swing/parallel.hpp"
#include "swing/rng.hpp"

namespace swing {

namespace {

constexpr int kModulationLength = 256;
constexpr double kMaxSkippedFraction = 1e-3;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Tokens of one OFF line with '#' comments removed.
std::vector<std::string> tokens_of(const std::string& line) {
  const std::string body = line.substr(0, line.find('#'));
  std::istringstream ss(body);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

double parse_number(const std::string& token, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size() || !std::isfinite(v)) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected a number, got '" + token + "'", line);
  }
}

long long parse_integer(const std::string& token, std::size_t line) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected an integer, got '" + token + "'", line);
  }
}

// Reads nonempty, comment-stripped lines and tracks their numbers.
class OffReader {
 public:
  explicit OffReader(std::istream& in) : in_(in) {}

  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      tokens = tokens_of(line);
      if (!tokens.empty()) return true;
    }
    return false;
  }
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

struct HullFace {
  Index a, b, c;
  Eigen::Vector3d normal;
  double offset;
  bool alive;
};

std::uint64_t edge_key(Index u, Index v, Index n) {
  return static_cast<std::uint64_t>(u) * static_cast<std::uint64_t>(n) +
         static_cast<std::uint64_t>(v);
}

std::string quote_csv(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// One RFC 4180 record; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  ++line;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  char c = 0;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty()) throw ParseError("quote inside an unquoted field", line);
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
      was_quoted = false;
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      fields.push_back(field);
      return true;
    } else {
      if (was_quoted) throw ParseError("text after a closing quote", line);
      field += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line);
  fields.push_back(field);
  return true;
}

const std::vector<std::string>& csv_header() {
  static const std::vector<std::string> header = {"method", "kernel", "n",       "r",   "m",
                                                  "p_halt", "fne",    "seconds", "seed"};
  return header;
}

WeightOptions with_self_loops() {
  WeightOptions o;
  o.self_loops = true;
  return o;
}

void check_skipped(const SwingFactorization& fac) {
  const double total =
      static_cast<double>(fac.first_walks.total_steps() + fac.second_walks.total_steps());
  const double skipped = static_cast<double>(fac.first.skipped_steps + fac.second.skipped_steps);
  if (total > 0.0 && skipped / total > kMaxSkippedFraction) {
    throw Error("SWING: " + std::to_string(fac.first.skipped_steps + fac.second.skipped_steps) +
                " deposit steps had zero normalization");
  }
}

Matrix predict_with(const std::function<Vector(const Vector&)>& apply, const Matrix& visible) {
  Matrix out(visible.rows(), visible.cols());
  for (Index c = 0; c < visible.cols(); ++c) out.col(c) = apply(visible.col(c));
  return out;
}

}  // namespace

double synthetic_half_width(Index n) {
  if (n < 1) throw InvalidInput("point count must be at least 1");
  return std::cbrt(std::numbers::pi * static_cast<double>(n) / 6.0);
}

PointCloud gen_synthetic_cloud(Index n, std::uint64_t seed) {
  const double h = synthetic_half_width(n);
  Rng rng = make_rng(seed, {0x434c4f5544});
  std::uniform_real_distribution<double> unif(-h, h);
  Matrix points(n, 3);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < 3; ++k) points(i, k) = unif(rng);
  }
  return PointCloud(std::move(points));
}

Mesh parse_off(std::istream& in) {
  OffReader reader(in);
  std::vector<std::string> tok;
  if (!reader.next(tok)) throw ParseError("empty OFF file", std::max<std::size_t>(reader.line(), 1));
  const std::string magic = tok[0];
  if (magic != "OFF" && magic != "NOFF") {
    throw ParseError("expected OFF or NOFF header, got '" + magic + "'", reader.line());
  }
  const bool with_normals = magic == "NOFF";
  tok.erase(tok.begin());
  if (tok.empty() && !reader.next(tok)) throw ParseError("missing element counts", reader.line());
  if (tok.size() < 2) throw ParseError("expected vertex and face counts", reader.line());
  const long long nv = parse_integer(tok[0], reader.line());
  const long long nf = parse_integer(tok[1], reader.line());
  if (nv < 1 || nf < 0) throw ParseError("invalid element counts", reader.line());

  Mesh mesh;
  mesh.vertices.resize(nv, 3);
  Matrix file_normals(with_normals ? nv : 0, 3);
  const std::size_t per_vertex = with_normals ? 6 : 3;
  for (long long v = 0; v < nv; ++v) {
    if (!reader.next(tok)) throw ParseError("unexpected end of file in vertex list", reader.line());
    if (tok.size() < per_vertex) {
      throw ParseError("vertex needs " + std::to_string(per_vertex) + " values", reader.line());
    }
    for (Index k = 0; k < 3; ++k) {
      mesh.vertices(v, k) = parse_number(tok[static_cast<std::size_t>(k)], reader.line());
      if (with_normals) {
        file_normals(v, k) = parse_number(tok[static_cast<std::size_t>(k) + 3], reader.line());
      }
    }
    if (with_normals) {
      const double norm = file_normals.row(v).norm();
      if (!(norm > 0.0)) throw ParseError("zero vertex normal", reader.line());
      file_normals.row(v) /= norm;
    }
  }
  for (long long f = 0; f < nf; ++f) {
    if (!reader.next(tok)) throw ParseError("unexpected end of file in face list", reader.line());
    const long long k = parse_integer(tok[0], reader.line());
    if (k < 3) throw ParseError("faces need at least 3 vertices", reader.line());
    if (tok.size() < static_cast<std::size_t>(k) + 1) {
      throw ParseError("face lists fewer indices than declared", reader.line());
    }
    std::vector<Index> idx(static_cast<std::size_t>(k));
    for (long long j = 0; j < k; ++j) {
      const long long v = parse_integer(tok[static_cast<std::size_t>(j) + 1], reader.line());
      if (v < 0 || v >= nv) throw ParseError("vertex index out of range", reader.line());
      idx[static_cast<std::size_t>(j)] = static_cast<Index>(v);
    }
    for (std::size_t j = 1; j + 1 < idx.size(); ++j) mesh.faces.push_back({idx[0], idx[j], idx[j + 1]});
  }
  mesh.normals = with_normals ? file_normals : compute_vertex_normals(mesh.vertices, mesh.faces);
  return mesh;
}

Mesh load_mesh_off(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open mesh file " + path.string());
  return parse_off(in);
}

void write_off(std::ostream& out, const Mesh& mesh) {
  out << "OFF\n" << mesh.size() << ' ' << mesh.faces.size() << " 0\n";
  for (Index v = 0; v < mesh.size(); ++v) {
    out << format_double(mesh.vertices(v, 0)) << ' ' << format_double(mesh.vertices(v, 1)) << ' '
        << format_double(mesh.vertices(v, 2)) << '\n';
  }
  for (const Face& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

Matrix compute_vertex_normals(const Matrix& vertices, const std::vector<Face>& faces) {
  if (vertices.cols() != 3) throw InvalidInput("vertex normals need 3D vertices");
  Matrix acc = Matrix::Zero(vertices.rows(), 3);
  for (const Face& f : faces) {
    for (Index v : f) {
      if (v < 0 || v >= vertices.rows()) throw InvalidInput("face index out of range");
    }
    const Eigen::Vector3d a = vertices.row(f[0]).transpose();
    const Eigen::Vector3d b = vertices.row(f[1]).transpose();
    const Eigen::Vector3d c = vertices.row(f[2]).transpose();
    // Twice the area times the unit normal.
    const Eigen::Vector3d n = (b - a).cross(c - a);
    for (Index v : f) acc.row(v) += n.transpose();
  }
  for (Index v = 0; v < acc.rows(); ++v) {
    const double norm = acc.row(v).norm();
    if (norm > 0.0) {
      acc.row(v) /= norm;
    } else {
      acc.row(v) << 0.0, 0.0, 1.0;
    }
  }
  return acc;
}

std::vector<Face> convex_hull_faces(const Matrix& points) {
  const Index n = points.rows();
  if (points.cols() != 3 || n < 4) throw InvalidInput("convex hull needs at least 4 points in 3D");
  auto p = [&](Index i) -> Eigen::Vector3d { return points.row(i).transpose(); };
  const double scale = std::max(1.0, points.cwiseAbs().maxCoeff());
  const double eps = 1e-10 * scale;

  // Initial tetrahedron from extreme points.
  Index i0 = 0;
  Index i1 = 0;
  double best = -1.0;
  for (Index i = 1; i < n; ++i) {
    const double d = (p(i) - p(i0)).norm();
    if (d > best) best = d, i1 = i;
  }
  Index i2 = -1;
  best = eps;
  const Eigen::Vector3d axis = (p(i1) - p(i0)).normalized();
  for (Index i = 0; i < n; ++i) {
    const Eigen::Vector3d w = p(i) - p(i0);
    const double d = (w - w.dot(axis) * axis).norm();
    if (d > best) best = d, i2 = i;
  }
  if (i2 < 0) throw InvalidInput("convex hull: points are collinear");
  const Eigen::Vector3d plane = (p(i1) - p(i0)).cross(p(i2) - p(i0)).normalized();
  Index i3 = -1;
  best = eps;
  for (Index i = 0; i < n; ++i) {
    const double d = std::abs((p(i) - p(i0)).dot(plane));
    if (d > best) best = d, i3 = i;
  }
  if (i3 < 0) throw InvalidInput("convex hull: points are coplanar");
  const Eigen::Vector3d interior = 0.25 * (p(i0) + p(i1) + p(i2) + p(i3));

  std::vector<HullFace> faces;
  std::unordered_map<std::uint64_t, std::size_t> owner;  // directed edge -> face
  auto add_face = [&](Index a, Index b, Index c) {
    Eigen::Vector3d normal = (p(b) - p(a)).cross(p(c) - p(a));
    if (normal.dot(p(a) - interior) < 0.0) {
      std::swap(b, c);
      normal = -normal;
    }
    normal.normalize();
    const std::size_t id = faces.size();
    faces.push_back({a, b, c, normal, normal.dot(p(a)), true});
    owner[edge_key(a, b, n)] = id;
    owner[edge_key(b, c, n)] = id;
    owner[edge_key(c, a, n)] = id;
  };
  add_face(i0, i1, i2);
  add_face(i0, i1, i3);
  add_face(i0, i2, i3);
  add_face(i1, i2, i3);

  std::vector<char> visible;
  for (Index q = 0; q < n; ++q) {
    if (q == i0 || q == i1 || q == i2 || q == i3) continue;
    const Eigen::Vector3d x = p(q);
    visible.assign(faces.size(), 0);
    bool any = false;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f].alive && faces[f].normal.dot(x) - faces[f].offset > eps) {
        visible[f] = 1;
        any = true;
      }
    }
    if (!any) continue;
    std::vector<std::pair<Index, Index>> horizon;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) continue;
      const HullFace& hf = faces[f];
      const std::array<std::pair<Index, Index>, 3> edges = {
          std::pair{hf.a, hf.b}, std::pair{hf.b, hf.c}, std::pair{hf.c, hf.a}};
      for (const auto& [u, v] : edges) {
        const auto twin = owner.find(edge_key(v, u, n));
        if (twin == owner.end() || !visible[twin->second]) horizon.emplace_back(u, v);
      }
    }
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) continue;
      HullFace& hf = faces[f];
      hf.alive = false;
      owner.erase(edge_key(hf.a, hf.b, n));
      owner.erase(edge_key(hf.b, hf.c, n));
      owner.erase(edge_key(hf.c, hf.a, n));
    }
    for (const auto& [u, v] : horizon) {
      // The horizon edge keeps the orientation it had in the removed face.
      const Eigen::Vector3d normal = (p(v) - p(u)).cross(x - p(u)).normalized();
      const std::size_t id = faces.size();
      faces.push_back({u, v, q, normal, normal.dot(p(u)), true});
      owner[edge_key(u, v, n)] = id;
      owner[edge_key(v, q, n)] = id;
      owner[edge_key(q, u, n)] = id;
    }
  }
  std::vector<Face> out;
  for (const HullFace& f : faces) {
    if (f.alive) out.push_back({f.a, f.b, f.c});
  }
  return out;
}

Mesh make_sphere_mesh(Index n) {
  if (n < 4) throw InvalidInput("sphere mesh needs at least 4 vertices");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  Mesh mesh;
  mesh.vertices.resize(n, 3);
  for (Index i = 0; i < n; ++i) {
    const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double radius = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double theta = golden * static_cast<double>(i);
    mesh.vertices.row(i) << radius * std::cos(theta), y, radius * std::sin(theta);
  }
  mesh.faces = convex_hull_faces(mesh.vertices);
  mesh.normals = compute_vertex_normals(mesh.vertices, mesh.faces);
  return mesh;
}

Mesh make_icosahedron() {
  const double g = std::numbers::phi;
  Mesh mesh;
  mesh.vertices.resize(12, 3);
  mesh.vertices << -1, g, 0, 1, g, 0, -1, -g, 0, 1, -g, 0, 0, -1, g, 0, 1, g, 0, -1, -g, 0, 1, -g,
      g, 0, -1, g, 0, 1, -g, 0, -1, -g, 0, 1;
  mesh.vertices /= std::sqrt(1.0 + g * g);
  mesh.faces = convex_hull_faces(mesh.vertices);
  mesh.normals = compute_vertex_normals(mesh.vertices, mesh.faces);
  return mesh;
}

Matrix normalized_mesh_coordinates(const Mesh& mesh) {
  const Matrix centered = mesh.vertices.rowwise() - mesh.vertices.colwise().mean();
  const double rms = std::sqrt(centered.rowwise().squaredNorm().mean());
  if (!(rms > 0.0)) throw InvalidInput("mesh vertices coincide");
  return centered / rms;
}

void write_csv(std::ostream& out, const SweepResult& result) {
  const auto& header = csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const SweepRow& row : result.rows) {
    out << quote_csv(row.method) << ',' << quote_csv(row.kernel) << ',' << row.n << ',' << row.r
        << ',' << row.m << ',' << format_double(row.p_halt) << ','
        << (row.fne ? format_double(*row.fne) : std::string()) << ','
        << format_double(row.seconds) << ',' << row.seed << '\n';
  }
}

SweepResult read_csv(std::istream& in) {
  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!read_record(in, fields, line)) throw ParseError("empty CSV", 1);
  if (fields != csv_header()) throw ParseError("unexpected CSV header", line);
  SweepResult result;
  while (read_record(in, fields, line)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != csv_header().size()) throw ParseError("wrong number of fields", line);
    SweepRow row;
    row.method = fields[0];
    row.kernel = fields[1];
    row.n = static_cast<Index>(parse_integer(fields[2], line));
    row.r = static_cast<Index>(parse_integer(fields[3], line));
    row.m = static_cast<int>(parse_integer(fields[4], line));
    row.p_halt = parse_number(fields[5], line);
    if (!fields[6].empty()) row.fne = parse_number(fields[6], line);
    row.seconds = parse_number(fields[7], line);
    try {
      row.seed = std::stoull(fields[8]);
    } catch (const std::exception&) {
      throw ParseError("bad seed '" + fields[8] + "'", line);
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

SwingConfig make_swing_config(const SwingSettings& settings, const WalkConfig& walk, Index r) {
  SwingConfig cfg;
  cfg.walk = walk;
  cfg.temperature = settings.temperature;
  cfg.length_mode = settings.length_mode;
  for (FeatureMapSpec* spec : {&cfg.phi, &cfg.psi}) {
    spec->features = r;
    spec->orthogonal = settings.orthogonal;
  }
  cfg.phi.kind = settings.phi_kind;
  cfg.psi.kind = settings.psi_kind;
  if (settings.phi_kind == FeatureKind::positive) cfg.phi.importance_scale = settings.importance_scale;
  if (settings.psi_kind == FeatureKind::positive) cfg.psi.importance_scale = settings.importance_scale;
  cfg.validate();
  return cfg;
}

SweepResult fne_sweep(const FneSweepConfig& cfg) {
  SweepResult result;
  const WeightFunction f = WeightFunction::gaussian(cfg.bandwidth);
  WalkConfig walk;
  walk.p_halt = cfg.p_halt;
  walk.walks_per_node = cfg.m;
  walk.seed = cfg.seed;
  walk.validate();
  for (const std::string& text : cfg.kernels) {
    const KernelSpec spec = parse_kernel_spec(text, cfg.truncation);
    const Modulation rho = deconvolve_modulation(spec, kModulationLength);
    for (Index n : cfg.n_list) {
      if (n > cfg.oracle_cap) {
        throw InvalidInput("FNE sweep: N = " + std::to_string(n) + " exceeds the oracle cap " +
                           std::to_string(cfg.oracle_cap));
      }
      const PointCloud cloud = gen_synthetic_cloud(n, cfg.seed);
      const Matrix W = materialize_weights(cloud, f, with_self_loops());
      Matrix exact;
      try {
        exact = exact_kernel(W, spec);
      } catch (const ConvergenceError& e) {
        throw ConvergenceError(text + ", N = " + std::to_string(n) + ": " + e.what(), e.tail());
      }
      SweepRow base{"", spec.describe(), n, 0, cfg.m, cfg.p_halt, std::nullopt, 0.0, cfg.seed};

      const auto start = std::chrono::steady_clock::now();
      const Vector deg = weighted_degrees(W);
      const auto [K1, K2] = grf_factorize(W, deg, rho, walk);
      SweepRow grf_row = base;
      grf_row.method = "grf";
      grf_row.seconds = seconds_since(start);
      grf_row.fne = fne(exact, grf_dense_kernel(K1, K2));
      result.rows.push_back(grf_row);

      std::vector<SweepRow> rows(cfg.r_list.size(), base);
      auto swing_row = [&](std::size_t k) {
        const Index r = cfg.r_list[k];
        const SwingConfig sc = make_swing_config(cfg.swing, walk, r);
        const auto row_start = std::chrono::steady_clock::now();
        const SwingFactorization fac = swing_factorize(cloud, f, rho, sc);
        SweepRow& row = rows[k];
        row.method = "swing";
        row.r = r;
        row.seconds = seconds_since(row_start);
        check_skipped(fac);
        row.fne = fne(exact, fac.dense());
      };
      if (cfg.parallel_rows) {
        parallel_for(rows.size(), [&](std::size_t k) {
          const ScopedThreadCount serial(1);
          swing_row(k);
        });
      } else {
        for (std::size_t k = 0; k < rows.size(); ++k) swing_row(k);
      }
      result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    }
  }
  return result;
}

SweepResult time_sweep(const TimeSweepConfig& cfg) {
  if (cfg.repeats < 1) throw InvalidInput("time sweep: repeats must be at least 1");
  SweepResult result;
  const WeightFunction f = WeightFunction::gaussian(cfg.bandwidth);
  const KernelSpec spec = parse_kernel_spec(cfg.kernel);
  const Modulation rho = deconvolve_modulation(spec, kModulationLength);
  WalkConfig walk;
  walk.p_halt = cfg.p_halt;
  walk.walks_per_node = cfg.m;
  walk.seed = cfg.seed;
  walk.validate();
  const SwingConfig sc = make_swing_config(cfg.swing, walk, cfg.r);
  // Timed regions stay on one thread so the two pipelines compare cleanly.
  const ScopedThreadCount serial(1);

  for (Index n : cfg.n_list) {
    const PointCloud cloud = gen_synthetic_cloud(n, cfg.seed);
    const Vector probe = Vector::Ones(n);
    double sink = 0.0;  // keeps the timed results observable

    auto time_it = [&](auto&& body) {
      std::vector<double> samples;
      for (int rep = 0; rep <= cfg.repeats; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        sink += body();
        if (rep > 0) samples.push_back(seconds_since(start));  // rep 0 is warm-up
      }
      return median(samples);
    };

    const double grf_time = time_it([&] {
      const Matrix W = materialize_weights(cloud, f, with_self_loops());
      const Vector deg = weighted_degrees(W);
      const auto [K1, K2] = grf_factorize(W, deg, rho, walk);
      return grf_matvec(K1, K2, probe).sum();
    });
    const double swing_time = time_it([&] {
      const SwingFactorization fac = swing_factorize(cloud, f, rho, sc);
      return fac.matvec(probe).sum();
    });
    if (!std::isfinite(sink)) sink = 0.0;

    SweepRow row{"grf", spec.describe(), n, 0, cfg.m, cfg.p_halt, std::nullopt, grf_time, cfg.seed};
    result.rows.push_back(row);
    row.method = "swing";
    row.r = cfg.r;
    row.seconds = swing_time;
    result.rows.push_back(row);
  }
  return result;
}

PowerLawFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidInput("power-law fit needs at least two (x, y) pairs");
  }
  const std::size_t n = x.size();
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidInput("power-law fit needs positive data");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (!(sxx > 0.0)) throw InvalidInput("power-law fit needs distinct x values");
  PowerLawFit fit;
  fit.exponent = sxy / sxx;
  fit.prefactor = std::exp(my - fit.exponent * mx);
  return fit;
}

double mean_cosine(const Matrix& predicted, const Matrix& reference,
                   const std::vector<Index>& rows) {
  if (rows.empty()) throw InvalidInput("mean cosine over an empty set");
  double total = 0.0;
  for (Index i : rows) {
    const double denom = predicted.row(i).norm() * reference.row(i).norm();
    if (denom > 0.0) total += predicted.row(i).dot(reference.row(i)) / denom;
  }
  return total / static_cast<double>(rows.size());
}

NormalExperimentResult normal_prediction_experiment(const Mesh& mesh,
                                                    const NormalExperimentConfig& cfg) {
  if (!(cfg.mask_fraction > 0.0 && cfg.mask_fraction < 1.0)) {
    throw InvalidInput("mask fraction must lie in (0, 1)");
  }
  const Index n = mesh.size();
  if (n < 1) throw InvalidInput("mesh has no vertices");
  const PointCloud cloud(normalized_mesh_coordinates(mesh));

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng mask_rng = make_rng(cfg.seed, {0x4d41534b});
  std::shuffle(order.begin(), order.end(), mask_rng);
  const Index masked_count = std::min<Index>(
      n, static_cast<Index>(std::ceil(cfg.mask_fraction * static_cast<double>(n))));
  std::vector<Index> masked(order.begin(), order.begin() + masked_count);
  std::sort(masked.begin(), masked.end());

  Matrix visible = mesh.normals;
  for (Index i : masked) visible.row(i).setZero();

  NormalExperimentResult result;
  result.masked = masked_count;
  result.lambda = cfg.lambda;
  result.sigma = cfg.sigma;

  auto weight_for = [](double sigma) { return WeightFunction::gaussian(sigma / std::numbers::sqrt2); };
  auto bf_score = [&](double lambda, double sigma) {
    const Matrix W = materialize_weights(cloud, weight_for(sigma), with_self_loops());
    const Matrix K = exact_kernel(W, KernelSpec(Diffusion{lambda}, cfg.truncation));
    return mean_cosine(K * visible, mesh.normals, masked);
  };
  if (cfg.grid_search) {
    double best = -2.0;
    for (double lambda : {0.05, 0.1, 0.2, 0.5}) {
      for (double sigma : {0.25, 0.5, 1.0}) {
        try {
          const double score = bf_score(lambda, sigma);
          if (score > best) best = score, result.lambda = lambda, result.sigma = sigma;
        } catch (const ConvergenceError&) {
        }
      }
    }
    if (best < -1.0) throw Error("grid search: no (lambda, sigma) pair converged");
  }

  const WeightFunction f = weight_for(result.sigma);
  const KernelSpec spec(Diffusion{result.lambda}, cfg.truncation);
  const Matrix W = materialize_weights(cloud, f, with_self_loops());
  auto wants = [&](const char* name) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), name) != cfg.methods.end();
  };
  for (const std::string& name : cfg.methods) {
    if (name != "bf" && name != "grf" && name != "swing") {
      throw InvalidInput("unknown method '" + name + "' (expected bf, grf or swing)");
    }
  }

  if (wants("bf")) {
    const auto start = std::chrono::steady_clock::now();
    const Matrix K = exact_kernel(W, spec);
    const Matrix predicted = K * visible;
    result.bf_seconds = seconds_since(start);
    result.bf = mean_cosine(predicted, mesh.normals, masked);
  }
  const Modulation rho = deconvolve_modulation(spec, kModulationLength);
  WalkConfig walk;
  walk.p_halt = cfg.p_halt;
  walk.walks_per_node = cfg.m;
  walk.seed = cfg.seed;
  walk.validate();
  if (wants("grf")) {
    const auto start = std::chrono::steady_clock::now();
    const Vector deg = weighted_degrees(W);
    const auto [K1, K2] = grf_factorize(W, deg, rho, walk);
    const Matrix predicted =
        predict_with([&](const Vector& v) { return grf_matvec(K1, K2, v); }, visible);
    result.grf_seconds = seconds_since(start);
    result.grf = mean_cosine(predicted, mesh.normals, masked);
  }
  if (wants("swing")) {
    const auto start = std::chrono::steady_clock::now();
    const SwingFactorization fac =
        swing_factorize(cloud, f, rho, make_swing_config(cfg.swing, walk, cfg.r));
    check_skipped(fac);
    const Matrix predicted = predict_with([&](const Vector& v) { return fac.matvec(v); }, visible);
    result.swing_seconds = seconds_since(start);
    result.swing = mean_cosine(predicted, mesh.normals, masked);
  }
  return result;
}

}  // namespace swing
