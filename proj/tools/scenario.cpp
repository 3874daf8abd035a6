#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "rqdet/acceptance.hpp"
#include "rqdet/coincidence.hpp"
#include "rqdet/csv.hpp"
#include "rqdet/photo.hpp"
#include "rqdet/scalar.hpp"
#include "rqdet/spin.hpp"

namespace rqdet::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kKinds = {"toa",  "toa-moving", "toa-quadratic", "photo",
                                         "glauber", "spin", "coincidence", "degradation"};

struct Table {
  std::string file;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Output {
  std::vector<Table> tables;
  ojson grid = ojson::object();
  ojson results = ojson::object();
  double max_imag_residue = 0.0;
};

struct Context {
  Node root;
  fs::path base;
  unsigned threads = 1;
  Diagnostics warnings;
  Diagnostics advisories;

  [[nodiscard]] std::string resolve(const std::string& path) const {
    const fs::path p(path);
    return (p.is_absolute() ? p : base / p).string();
  }
  void checkpoint() const {
    if (!root.issues().empty()) throw ConfigError(root.issues().items());
  }
};

std::string csv_name(const Context& ctx, const std::string& kind) {
  const Node out = ctx.root.optional_child("output");
  out.allow_only({"path"});
  return out ? out.text_or("path", kind + ".csv") : kind + ".csv";
}

// ---------------------------------------------------------------------------
// Shared config pieces

std::optional<MomentumGrid> parse_grid(const Node& n, double mass) {
  if (!n) return std::nullopt;
  if (n.has("segments")) {
    n.allow_only({"segments"});
    std::optional<MomentumGrid> merged;
    for (const auto& seg : n.child("segments").elements()) {
      auto g = parse_grid(seg, mass);
      if (!g) continue;
      if (!merged) {
        merged = std::move(g);
      } else if (auto m = guarded(seg, [&] { return merge_grids(*merged, *g); })) {
        merged = std::move(m);
      }
    }
    if (!merged) n.fail("no usable grid segment");
    return merged;
  }
  n.allow_only({"k_min", "k_max", "n", "scheme"});
  const double lo = n.number("k_min"), hi = n.number("k_max");
  const int count = n.integer("n");
  const std::string scheme_name = n.text_or("scheme", "gauss-legendre");
  const auto scheme = guarded(n, [&] { return quadrature_scheme_from_string(scheme_name); });
  if (!n.issues().empty() || !scheme) return std::nullopt;
  return guarded(n, [&] { return build_grid(lo, hi, count, *scheme, mass); });
}

ojson grid_summary(const MomentumGrid& g) {
  return {{"nodes", g.size()}, {"k_min", g.k_min()}, {"k_max", g.k_max()},
          {"scheme", to_string(g.scheme())}, {"mass", g.mass()}};
}

std::vector<double> parse_range(const Node& n) {
  if (!n) return {};
  if (n.raw().is_array() || n.raw().is_number()) {
    auto v = n.as_numbers();
    if (v.empty()) n.fail("must not be empty");
    return v;
  }
  n.allow_only({"start", "stop", "count", "step"});
  const double a = n.number("start"), b = n.number("stop");
  if (n.has("count") == n.has("step")) {
    n.fail("give exactly one of 'count' and 'step'");
    return {};
  }
  if (b < a) {
    n.fail("'stop' must not be below 'start'");
    return {};
  }
  long count = 0;
  if (n.has("count")) {
    count = n.integer("count");
    if (count < 1) n.child("count").fail("must be at least 1");
  } else {
    const double step = n.number("step");
    if (!(step > 0.0)) {
      n.child("step").fail("must be positive");
      return {};
    }
    count = static_cast<long>(std::floor((b - a) / step * (1.0 + 1e-12))) + 1;
  }
  if (count < 1) return {};
  if (count > 10'000'000) {
    n.fail("more than 1e7 points");
    return {};
  }
  std::vector<double> out(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i)
    out[static_cast<std::size_t>(i)] = count == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
  if (n.has("step")) {
    const double step = n.number("step");
    for (long i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = a + step * static_cast<double>(i);
  }
  return out;
}

std::optional<Embedding> parse_embedding(const Node& n, const Context& ctx) {
  if (!n) return Embedding{StaticEmbedding{}};
  const std::string type = n.text("type");
  std::optional<Embedding> e;
  if (type == "static") {
    n.allow_only({"type"});
    e = StaticEmbedding{};
  } else if (type == "inertial") {
    n.allow_only({"type", "velocity"});
    auto v = n.child("velocity").as_numbers();
    if (v.size() == 1) v.resize(3, 0.0);
    if (v.size() != 3) {
      n.child("velocity").fail("expected a number (x component) or [vx, vy, vz]");
      return std::nullopt;
    }
    e = InertialEmbedding{Vec3(v[0], v[1], v[2])};
  } else if (type == "uniform-acceleration") {
    n.allow_only({"type", "acceleration"});
    e = UniformAccelerationEmbedding{n.number("acceleration")};
  } else if (type == "worldline") {
    n.allow_only({"type", "path"});
    const std::string path = n.text("path");
    if (path.empty()) return std::nullopt;
    if (auto w = guarded(n.child("path"), [&] { return load_worldline_csv(ctx.resolve(path)); })) e = std::move(*w);
  } else if (!type.empty()) {
    n.child("type").fail("unknown embedding '" + type + "' (static, inertial, uniform-acceleration, worldline)");
  }
  if (e && !guarded(n, [&] { validate_embedding(*e); return true; })) return std::nullopt;
  return e;
}

// alpha(omega) from a two-column table, linear in between, zero outside.
std::function<double(double)> tabulated_alpha(const CsvTable& t) {
  std::vector<double> w, a;
  for (const auto& r : t.rows) w.push_back(r[0]), a.push_back(r[1]);
  if (w.size() < 2 || !std::is_sorted(w.begin(), w.end()) ||
      std::adjacent_find(w.begin(), w.end()) != w.end())
    throw ValidationError("absorption table: need at least two rows with increasing omega");
  return [w, a](double x) {
    if (x < w.front() || x > w.back()) return 0.0;
    const auto it = std::upper_bound(w.begin(), w.end(), x);
    const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - w.begin()), w.size() - 1);
    const double t = (x - w[j - 1]) / (w[j] - w[j - 1]);
    return (1.0 - t) * a[j - 1] + t * a[j];
  };
}

std::optional<DegradationFunction> parse_degradation(const Node& n, const Context& ctx) {
  if (!n) return std::nullopt;
  const std::string type = n.text("type");
  std::optional<DegradationFunction> d;
  if (type == "gaussian-energy") {
    n.allow_only({"type", "energy", "heat_capacity", "temperature"});
    d = GaussianEnergyDegradation{n.number("energy"), n.number("heat_capacity"), n.number("temperature")};
  } else if (type == "diffusion") {
    n.allow_only({"type", "diffusion", "record_size"});
    d = DiffusionDegradation{n.number("diffusion"), n.number("record_size")};
  } else if (type == "gaussian") {
    n.allow_only({"type", "decay_time"});
    d = GaussianDegradation{n.number("decay_time")};
  } else if (type == "tabulated") {
    n.allow_only({"type", "path"});
    const std::string path = n.text("path");
    if (path.empty()) return std::nullopt;
    if (auto t = guarded(n.child("path"), [&] { return load_degradation_csv(ctx.resolve(path)); })) d = std::move(*t);
  } else if (type == "from-absorption") {
    n.allow_only({"type", "mass", "omega_max", "alpha"});
    const double mass = n.number("mass"), omega_max = n.number("omega_max");
    const Node alpha = n.child("alpha");
    std::function<double(double)> f;
    if (alpha && alpha.raw().is_number()) {
      const double c = alpha.as_number();
      f = [c](double) { return c; };
    } else if (alpha) {
      alpha.allow_only({"path"});
      const std::string path = alpha.text("path");
      if (!path.empty())
        if (auto t = guarded(alpha.child("path"), [&] { return tabulated_alpha(read_numeric_csv_file(ctx.resolve(path), 2, 2)); }))
          f = std::move(*t);
    }
    if (!f || !n.issues().empty()) return std::nullopt;
    if (auto a = guarded(n, [&] { return AbsorptionDegradation(f, mass, omega_max); })) d = std::move(*a);
  } else if (!type.empty()) {
    n.child("type").fail("unknown degradation '" + type +
                         "' (gaussian-energy, diffusion, gaussian, tabulated, from-absorption)");
  }
  if (d && !guarded(n, [&] { validate_degradation(*d); return true; })) return std::nullopt;
  return d;
}

std::optional<DetectorConfig> parse_detector(const Node& n, Context& ctx) {
  if (!n) return std::nullopt;
  n.allow_only({"sigma", "delta", "embedding", "degradation"});
  DetectorConfig det;
  det.sigma = n.number("sigma");
  det.delta = n.number("delta");
  auto e = parse_embedding(n.optional_child("embedding"), ctx);
  auto d = parse_degradation(n.child("degradation"), ctx);
  if (!e || !d) return std::nullopt;
  det.embedding = std::move(*e);
  det.degradation = std::move(*d);
  if (!guarded(n, [&] { validate(det); return true; })) return std::nullopt;
  const Diagnostics adv = advisories(det);
  for (const auto& w : adv.warnings()) ctx.advisories.warn(w.code, n.path() + ": " + w.message);
  return det;
}

// Checked on the raw config so the issue is reported even if the rest of
// the detector failed to parse.
void require_static(const Node& det) {
  const Node e = det.optional_child("embedding");
  if (e && e.raw().is_object() && e.raw().value("type", "") != "static")
    e.fail("this kind requires a static detector");
}

struct GaussianPacket {
  double k0 = 0.0, spread = 0.0, x0 = 0.0, t0 = 0.0;
};

GaussianPacket parse_gaussian_packet(const Node& n) {
  GaussianPacket g{n.number("k0"), n.number("spread"), n.number_or("x0", 0.0), n.number_or("t0", 0.0)};
  if (n.has("spread") && n.child("spread").raw().is_number() && !(g.spread > 0.0)) n.child("spread").fail("must be positive");
  return g;
}

std::optional<OneParticleState> parse_scalar_state(const Node& n, const Context& ctx) {
  if (!n) return std::nullopt;
  const std::string type = n.text("type");
  if (type == "gaussian") {
    n.allow_only({"type", "mass", "grid", "k0", "spread", "x0", "t0"});
    const double mass = n.number_or("mass", 1.0);
    const auto packet = parse_gaussian_packet(n);
    auto g = parse_grid(n.child("grid"), mass);
    if (!g) return std::nullopt;
    return guarded(n, [&] { return OneParticleState::gaussian(*g, packet.k0, packet.spread, packet.x0, packet.t0); });
  }
  if (type == "csv") {
    n.allow_only({"type", "path", "mass"});
    const double mass = n.number_or("mass", 1.0);
    const std::string path = n.text("path");
    if (path.empty()) return std::nullopt;
    return guarded(n.child("path"), [&] { return load_state_csv(ctx.resolve(path), mass); });
  }
  if (!type.empty()) n.child("type").fail("unknown state type '" + type + "' (gaussian, csv)");
  return std::nullopt;
}

struct Scan {
  std::vector<double> tau, tau2, q;
};

Scan parse_scan(const Node& n, bool pair) {
  Scan s;
  if (!n) return s;
  if (pair) {
    n.allow_only({"tau", "tau2", "q"});
  } else {
    n.allow_only({"tau", "q"});
  }
  s.tau = parse_range(n.child("tau"));
  s.tau2 = n.has("tau2") ? parse_range(n.child("tau2")) : s.tau;
  s.q = n.child("q").as_numbers();
  if (pair && n.has("q") && s.q.size() != 2) n.child("q").fail("expected [Q1, Q2]");
  if (!pair && n.has("q") && s.q.empty()) n.child("q").fail("must not be empty");
  return s;
}

// Q-major list of (tau, Q) points.
std::vector<std::pair<double, double>> points(const Scan& s) {
  std::vector<std::pair<double, double>> out;
  for (double q : s.q)
    for (double t : s.tau) out.emplace_back(t, q);
  return out;
}

// ---------------------------------------------------------------------------
// Scalar kinds

Output run_scalar(Context& ctx, const std::string& kind) {
  const Node& root = ctx.root;
  root.allow_only({"kind", "state", "detector", "scan", "output", "normalize", "ideal", "epsilon"});
  auto state = parse_scalar_state(root.child("state"), ctx);
  const Node dnode = root.child("detector");
  auto det = parse_detector(dnode, ctx);
  const Scan scan = parse_scan(root.child("scan"), false);
  const bool normalize = root.flag_or("normalize", true);
  if (kind != "toa-moving" && root.has("ideal")) root.child("ideal").fail("only used by kind 'toa-moving'");
  if (kind != "toa-quadratic" && root.has("epsilon")) root.child("epsilon").fail("only used by kind 'toa-quadratic'");
  const std::string ideal = root.text_or("ideal", "none");
  if (ideal != "none" && ideal != "factorized" && ideal != "exact")
    root.child("ideal").fail("expected 'none', 'factorized' or 'exact'");
  if (kind != "toa-moving") require_static(dnode);
  if (normalize && scan.tau.size() == 1)
    root.child("scan").child("tau").fail("normalization needs at least two tau values");
  const std::string file = csv_name(ctx, kind);
  ctx.checkpoint();

  const auto rho = ReducedDensityMatrix::pure(*state);
  std::function<DensitySample(double, double)> eval;
  if (kind == "toa") {
    auto e = std::make_shared<LinearDensityEvaluator>(make_toa_evaluator(rho, *det, &ctx.warnings));
    eval = [e](double t, double q) { return e->sample(t, q); };
  } else if (kind == "toa-quadratic") {
    const double eps = root.number_or("epsilon", default_wightman_epsilon(rho.grid()));
    auto e = std::make_shared<LinearDensityEvaluator>(make_quadratic_evaluator(rho, *det, eps, &ctx.warnings));
    eval = [e](double t, double q) { return e->sample(t, q); };
  } else {
    auto e = ideal == "none"
                 ? std::make_shared<MovingDensityEvaluator>(rho, *det, &ctx.warnings)
                 : std::make_shared<MovingDensityEvaluator>(
                       rho, *det, ideal == "exact" ? IdealKernel::exact : IdealKernel::factorized, &ctx.warnings);
    eval = [e](double t, double q) { return e->sample(t, Vec3(q, 0.0, 0.0)); };
  }
  const auto pts = points(scan);
  const auto samples = parallel_map(pts, [&](const auto& p) { return eval(p.first, p.second); }, ctx.threads);

  Output out;
  out.grid = grid_summary(rho.grid());
  Table table{file, {"tau", "Q", "P"}, {}};
  ojson per_q = ojson::array();
  const std::size_t nt = scan.tau.size();
  for (std::size_t iq = 0; iq < scan.q.size(); ++iq) {
    DensityCurve curve{scan.tau, std::vector<double>(nt), {}};
    for (std::size_t it = 0; it < nt; ++it) {
      const auto& s = samples[iq * nt + it];
      curve.values[it] = s.value;
      out.max_imag_residue = std::max(out.max_imag_residue, s.imag_residue);
    }
    ojson info = {{"Q", scan.q[iq]}};
    if (normalize) {
      const double area = trapezoid(curve.tau, curve.values);
      if (!(area > 0.0))
        throw ValidationError("density at Q = " + format_double(scan.q[iq]) +
                              " has non-positive area over the tau scan; widen $.scan.tau or set normalize to false");
      const auto m = arrival_moments(curve);
      curve = normalize_curve(curve);
      info["area"] = area;
      info["mean_arrival_time"] = m.mean;
      info["arrival_time_variance"] = m.variance;
    }
    if (kind != "toa-moving") info["classical_arrival_time"] = classical_arrival_time(rho, scan.q[iq]);
    per_q.push_back(info);
    for (std::size_t it = 0; it < nt; ++it) table.rows.push_back({scan.tau[it], scan.q[iq], curve.values[it]});
  }
  out.results["normalized"] = normalize;
  out.results["per_Q"] = per_q;
  if (kind == "toa") out.results["time_integrated_probability"] = time_integrated_closed_form(rho, *det, &ctx.warnings);
  out.tables.push_back(std::move(table));
  return out;
}

// ---------------------------------------------------------------------------
// Photodetection

struct Profile {
  std::optional<CollimatedCoherentProfile> profile;
  std::optional<CoherentPulse> pulse;  // when a closed form applies
};

Profile parse_profile(const Node& n, const Context& ctx) {
  Profile p;
  if (!n) return p;
  const std::string type = n.text("type");
  if (type == "gaussian") {
    n.allow_only({"type", "grid", "zeta0", "k0", "delta"});
    const auto z = n.child("zeta0").as_complex();
    const double k0 = n.number("k0"), delta = n.number("delta");
    auto g = parse_grid(n.child("grid"), 0.0);
    if (!g) return p;
    p.profile = guarded(n, [&] { return CollimatedCoherentProfile::gaussian(*g, z, k0, delta); });
    CoherentPulse pulse;
    pulse.zeta0 = Eigen::Vector3cd(z, 0.0, 0.0);
    pulse.k0 = Vec3(0.0, 0.0, k0);
    pulse.delta = delta;
    if (p.profile) p.pulse = pulse;
  } else if (type == "pulse") {
    n.allow_only({"type", "grid", "zeta0", "k0", "delta"});
    CoherentPulse pulse;
    const auto zs = n.child("zeta0").elements();
    const auto ks = n.child("k0").as_numbers();
    if (zs.size() != 3) n.child("zeta0").fail("expected three [re, im] components");
    if (ks.size() != 3) n.child("k0").fail("expected [kx, ky, kz]");
    pulse.delta = n.number("delta");
    if (zs.size() != 3 || ks.size() != 3) return p;
    for (int i = 0; i < 3; ++i) pulse.zeta0(i) = zs[static_cast<std::size_t>(i)].as_complex();
    pulse.k0 = Vec3(ks[0], ks[1], ks[2]);
    if (!guarded(n, [&] { validate(pulse); return true; })) return p;
    std::optional<MomentumGrid> g;
    if (n.has("grid")) {
      g = parse_grid(n.child("grid"), 0.0);
    } else {
      const double k = pulse.k0.norm();
      g = guarded(n, [&] {
        return build_grid(std::max(k - 8.0 * pulse.delta, 1e-3 * k), k + 8.0 * pulse.delta, 256,
                          QuadratureScheme::gauss_legendre, 0.0);
      });
    }
    if (!g) return p;
    p.profile = guarded(n, [&] { return CollimatedCoherentProfile::from_pulse(*g, pulse); });
    if (p.profile) p.pulse = pulse;
  } else if (type == "csv") {
    n.allow_only({"type", "path"});
    const std::string path = n.text("path");
    if (!path.empty()) p.profile = guarded(n.child("path"), [&] { return load_profile_csv(ctx.resolve(path)); });
  } else if (!type.empty()) {
    n.child("type").fail("unknown profile type '" + type + "' (gaussian, pulse, csv)");
  }
  return p;
}

Output run_photo(Context& ctx) {
  const Node& root = ctx.root;
  root.allow_only({"kind", "profile", "detector", "scan", "output", "smear"});
  const auto prof = parse_profile(root.child("profile"), ctx);
  const Node dnode = root.child("detector");
  auto det = parse_detector(dnode, ctx);
  require_static(dnode);
  const Scan scan = parse_scan(root.child("scan"), false);
  const Node smear = root.optional_child("smear");
  double ws = 0.0, wd = 0.0;
  if (smear) {
    smear.allow_only({"sigma", "delta"});
    ws = smear.number("sigma");
    wd = smear.number("delta");
    if (ws < 0.0 || wd < 0.0) smear.fail("window widths must be non-negative");
  }
  const std::string file = csv_name(ctx, "photo");
  ctx.checkpoint();

  const PhotoEvaluator ev(*prof.profile, *det, &ctx.warnings);
  const double eta0 = prof.pulse ? detector_spectrum(*det, prof.pulse->k0.norm(), &ctx.warnings).real() : 0.0;
  const Vec3 axis = prof.pulse ? Vec3(prof.pulse->k0.normalized()) : Vec3(0.0, 0.0, 1.0);
  struct Row {
    PhotoTerms t;
    double smeared = 0.0, closed = 0.0;
  };
  const auto pts = points(scan);
  const auto rows = parallel_map(pts, [&](const auto& p) {
    Row r{ev.terms(p.first, p.second)};
    if (smear) r.smeared = ev.p2_smeared(p.first, p.second, ws, wd);
    if (prof.pulse) r.closed = gaussian_pulse_p1_closed(*prof.pulse, eta0, p.first, p.second * axis, &ctx.warnings);
    return r;
  }, ctx.threads);

  Output out;
  out.grid = grid_summary(prof.profile->grid());
  Table table{file, {"tau", "Q", "P0", "P1", "P2", "P"}, {}};
  if (smear) table.columns.push_back("P2_smeared");
  if (prof.pulse) table.columns.push_back("P1_closed_form");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& r = rows[i];
    out.max_imag_residue = std::max(out.max_imag_residue, r.t.imag_residue);
    std::vector<double> row = {pts[i].first, pts[i].second, r.t.p0, r.t.p1, r.t.p2, r.t.total()};
    if (smear) row.push_back(r.smeared);
    if (prof.pulse) row.push_back(r.closed);
    table.rows.push_back(std::move(row));
  }
  out.results["P0"] = ev.p0();
  if (prof.pulse) {
    out.results["eta_tilde_at_k0"] = eta0;
    out.results["counter_rotating_bound"] =
        counter_rotating_suppression(det->sigma, det->delta, prof.pulse->k0.norm());
  }
  out.tables.push_back(std::move(table));
  return out;
}

Output run_glauber(Context& ctx) {
  const Node& root = ctx.root;
  root.allow_only({"kind", "profile", "detector", "scan", "output"});
  const auto prof = parse_profile(root.child("profile"), ctx);
  const Node dnode = root.optional_child("detector");
  auto det = parse_detector(dnode, ctx);
  require_static(dnode);
  const Scan scan = parse_scan(root.child("scan"), false);
  const std::string file = csv_name(ctx, "glauber");
  ctx.checkpoint();

  std::optional<PhotoEvaluator> ev;
  if (det) ev.emplace(*prof.profile, *det, &ctx.warnings);
  const auto pts = points(scan);
  const auto rows = parallel_map(pts, [&](const auto& p) {
    std::pair<double, PhotoTerms> r{glauber_density(*prof.profile, p.first, p.second), {}};
    if (ev) r.second = ev->terms(p.first, p.second);
    return r;
  }, ctx.threads);

  Output out;
  out.grid = grid_summary(prof.profile->grid());
  Table table{file, {"tau", "Q", "G"}, {}};
  if (ev) table.columns.push_back("P1_rescaled");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> row = {pts[i].first, pts[i].second, rows[i].first};
    if (ev) {
      row.push_back(rows[i].second.p1 / incoherent_scale(det->sigma));
      out.max_imag_residue = std::max(out.max_imag_residue, rows[i].second.imag_residue);
    }
    table.rows.push_back(std::move(row));
  }
  if (ev) out.results["incoherent_scale"] = incoherent_scale(det->sigma);
  out.tables.push_back(std::move(table));
  return out;
}

// ---------------------------------------------------------------------------
// Spin

std::optional<SpinPOVMKernel> parse_spin_kernel(const Node& n, const Context& ctx) {
  if (!n) return std::nullopt;
  const std::string type = n.text("type");
  if (type == "constant") {
    n.allow_only({"type", "matrix"});
    const auto rows = n.child("matrix").elements();
    if (rows.size() != 4) {
      n.child("matrix").fail("expected 4 rows");
      return std::nullopt;
    }
    Matrix4cd m;
    for (int i = 0; i < 4; ++i) {
      const auto cols = rows[static_cast<std::size_t>(i)].elements();
      if (cols.size() != 4) {
        rows[static_cast<std::size_t>(i)].fail("expected 4 entries");
        return std::nullopt;
      }
      for (int j = 0; j < 4; ++j) m(i, j) = cols[static_cast<std::size_t>(j)].as_complex();
    }
    return guarded(n.child("matrix"), [&] { return SpinPOVMKernel::constant(m); });
  }
  if (type == "csv") {
    n.allow_only({"type", "path"});
    const std::string path = n.text("path");
    if (path.empty()) return std::nullopt;
    return guarded(n.child("path"), [&] { return load_spin_kernel_csv(ctx.resolve(path)); });
  }
  if (!type.empty()) n.child("type").fail("unknown kernel type '" + type + "' (constant, csv)");
  return std::nullopt;
}

Output run_spin(Context& ctx) {
  const Node& root = ctx.root;
  root.allow_only({"kind", "state", "kernel", "detector", "scan", "output"});
  const Node sn = root.child("state");
  std::optional<SpinorReducedDensityMatrix> rho;
  if (sn) {
    sn.allow_only({"type", "mass", "grid", "k0", "spread", "x0", "t0", "spinor"});
    const std::string type = sn.text("type");
    if (!type.empty() && type != "gaussian") sn.child("type").fail("unknown spin state type '" + type + "' (gaussian)");
    const double mass = sn.number("mass");
    const auto packet = parse_gaussian_packet(sn);
    Eigen::Vector2cd chi(1.0, 0.0);
    if (sn.has("spinor")) {
      const auto c = sn.child("spinor").elements();
      if (c.size() == 2) {
        chi = Eigen::Vector2cd(c[0].as_complex(), c[1].as_complex());
      } else {
        sn.child("spinor").fail("expected two components");
      }
    }
    auto g = parse_grid(sn.child("grid"), mass);
    if (g && sn.issues().empty()) {
      rho = guarded(sn, [&] {
        const auto psi = OneParticleState::gaussian(*g, packet.k0, packet.spread, packet.x0, packet.t0);
        return SpinorReducedDensityMatrix::product(*g, psi.psi(), chi);
      });
    }
  }
  const auto kernel = parse_spin_kernel(root.child("kernel"), ctx);
  const Node dnode = root.optional_child("detector");
  auto det = parse_detector(dnode, ctx);
  require_static(dnode);
  const Scan scan = parse_scan(root.child("scan"), false);
  const std::string file = csv_name(ctx, "spin");
  ctx.checkpoint();

  std::vector<SpinDensityEvaluator> evs;
  for (double q : scan.q) evs.emplace_back(*rho, *kernel, q);
  const std::size_t nt = scan.tau.size();
  std::vector<std::size_t> idx(scan.q.size() * nt);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto samples = parallel_map(idx, [&](std::size_t i) {
    const auto& ev = evs[i / nt];
    const double t = scan.tau[i % nt];
    return std::make_pair(ev.sample(t, 1), ev.sample(t, -1));
  }, ctx.threads);

  Output out;
  out.grid = grid_summary(rho->grid());
  Table table{file, {"tau", "Q", "mu", "P"}, {}};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double t = scan.tau[i % nt], q = scan.q[i / nt];
    const auto& [up, down] = samples[i];
    out.max_imag_residue = std::max({out.max_imag_residue, up.imag_residue, down.imag_residue});
    table.rows.push_back({t, q, 1.0, up.value});
    table.rows.push_back({t, q, -1.0, down.value});
  }
  ojson probs = ojson::array();
  for (double q : scan.q) {
    const auto p = spin_outcome_probability(*rho, *kernel, q, &ctx.warnings);
    probs.push_back({{"Q", q}, {"P(+1)", p.at(1)}, {"P(-1)", p.at(-1)}});
  }
  out.results["outcome_probabilities"] = probs;
  out.tables.push_back(std::move(table));
  return out;
}

// ---------------------------------------------------------------------------
// Coincidence

std::optional<TwoParticleState> parse_two_particle_state(const Node& n, const Context& ctx) {
  if (!n) return std::nullopt;
  const std::string type = n.text("type");
  if (type == "symmetrized-product") {
    n.allow_only({"type", "mass", "grid", "a", "b"});
    const double mass = n.number_or("mass", 1.0);
    const Node na = n.child("a"), nb = n.child("b");
    na.allow_only({"k0", "spread", "x0", "t0"});
    nb.allow_only({"k0", "spread", "x0", "t0"});
    const auto a = parse_gaussian_packet(na), b = parse_gaussian_packet(nb);
    auto g = parse_grid(n.child("grid"), mass);
    if (!g || !n.issues().empty()) return std::nullopt;
    return guarded(n, [&] {
      return TwoParticleState::symmetrized_product(OneParticleState::gaussian(*g, a.k0, a.spread, a.x0, a.t0),
                                                   OneParticleState::gaussian(*g, b.k0, b.spread, b.x0, b.t0));
    });
  }
  if (type == "csv") {
    n.allow_only({"type", "path", "mass"});
    const double mass = n.number_or("mass", 1.0);
    const std::string path = n.text("path");
    if (path.empty()) return std::nullopt;
    return guarded(n.child("path"), [&] { return load_two_particle_csv(ctx.resolve(path), mass); });
  }
  if (!type.empty()) n.child("type").fail("unknown two-particle state type '" + type + "' (symmetrized-product, csv)");
  return std::nullopt;
}

Output run_coincidence(Context& ctx) {
  const Node& root = ctx.root;
  root.allow_only({"kind", "state", "detectors", "scan", "output", "method"});
  auto state = parse_two_particle_state(root.child("state"), ctx);
  const auto dn = root.child("detectors").elements();
  std::vector<std::optional<DetectorConfig>> dets;
  for (const auto& d : dn) {
    dets.push_back(parse_detector(d, ctx));
    if (dets.back() && !has_constant_velocity(dets.back()->embedding))
      d.child("embedding").fail("coincidence detectors must be static or inertial");
  }
  if (root.has("detectors") && dn.size() != 2) root.child("detectors").fail("expected exactly two detectors");
  const Scan scan = parse_scan(root.child("scan"), true);
  const std::string method = root.text_or("method", "factorized");
  if (method != "factorized" && method != "nested") root.child("method").fail("expected 'factorized' or 'nested'");
  const std::string file = csv_name(ctx, "coincidence");
  ctx.checkpoint();

  const DetectorConfig& d1 = *dets[0];
  const DetectorConfig& d2 = *dets[1];
  const double q1 = scan.q[0], q2 = scan.q[1];
  std::vector<std::pair<double, double>> pts;
  for (double t1 : scan.tau)
    for (double t2 : scan.tau2) pts.emplace_back(t1, t2);
  std::vector<DensitySample> samples;
  if (method == "factorized") {
    const JointDensityEvaluator ev(*state, d1, d2, &ctx.warnings);
    samples = parallel_map(pts, [&](const auto& p) { return ev.sample(p.first, q1, p.second, q2); }, ctx.threads);
  } else {
    samples = parallel_map(pts, [&](const auto& p) {
      return DensitySample{joint_toa_density_nested(*state, d1, d2, p.first, q1, p.second, q2, &ctx.warnings), 0.0};
    }, ctx.threads);
  }
  Output out;
  out.grid = grid_summary(state->grid());
  Table table{file, {"tau1", "Q1", "tau2", "Q2", "P"}, {}};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out.max_imag_residue = std::max(out.max_imag_residue, samples[i].imag_residue);
    table.rows.push_back({pts[i].first, q1, pts[i].second, q2, samples[i].value});
  }
  out.results["method"] = method;
  out.tables.push_back(std::move(table));
  return out;
}

// ---------------------------------------------------------------------------
// Degradation functions

Output run_degradation(Context& ctx) {
  const Node& root = ctx.root;
  root.allow_only({"kind", "detector", "scan", "output"});
  auto det = parse_detector(root.child("detector"), ctx);
  const Node sn = root.child("scan");
  sn.allow_only({"s", "omega"});
  const auto s = parse_range(sn.child("s"));
  const auto omega = sn.has("omega") ? parse_range(sn.child("omega")) : std::vector<double>{};
  const std::string file = csv_name(ctx, "degradation");
  ctx.checkpoint();

  Output out;
  Table eta{file, {"s", "re_eta", "im_eta", "re_eta_eff", "im_eta_eff"}, {}};
  for (double x : s) {
    const cplx e = eval_eta(det->degradation, x), w = effective_window(det->degradation, det->sigma, x);
    eta.rows.push_back({x, e.real(), e.imag(), w.real(), w.imag()});
  }
  out.tables.push_back(std::move(eta));
  if (!omega.empty()) {
    const fs::path p(file);
    Table spectrum{(p.parent_path() / (p.stem().string() + "_spectrum" + p.extension().string())).string(),
               {"omega", "re_eta_tilde", "im_eta_tilde"}, {}};
    const auto values = parallel_map(omega, [&](double w) { return detector_spectrum(*det, w, &ctx.warnings); }, ctx.threads);
    for (std::size_t i = 0; i < omega.size(); ++i) spectrum.rows.push_back({omega[i], values[i].real(), values[i].imag()});
    out.tables.push_back(std::move(spectrum));
  }
  out.results["degradation"] = degradation_kind(det->degradation);
  out.results["decay_time"] = decay_time(det->degradation);
  out.results["window_halfwidth"] = window_halfwidth(det->degradation, det->sigma);
  return out;
}

// ---------------------------------------------------------------------------
// Output

ojson warning_list(const Diagnostics& d) {
  auto w = d.warnings();
  std::sort(w.begin(), w.end(), [](const Warning& a, const Warning& b) {
    return std::tie(a.code, a.message) < std::tie(b.code, b.message);
  });
  ojson out = ojson::array();
  for (const auto& x : w) out.push_back({{"code", x.code}, {"message", x.message}});
  return out;
}

void summarize(const Diagnostics& d, const char* label, std::ostream& err) {
  std::map<std::string, std::pair<std::string, int>> by_code;
  for (const auto& w : d.warnings()) {
    auto& e = by_code[w.code];
    if (e.second++ == 0) e.first = w.message;
  }
  for (const auto& [code, e] : by_code) {
    err << label << " [" << code << "] " << e.first;
    if (e.second > 1) err << " (+" << e.second - 1 << " similar)";
    err << "\n";
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path.string());
  f << text;
  if (!f) throw ValidationError("failed writing " + path.string());
}

void write_table(const fs::path& dir, const Table& t) {
  std::ostringstream s;
  CsvWriter w(s, t.columns);
  for (const auto& r : t.rows) w.row(r);
  fs::path p = dir / t.file;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_text(p, s.str());
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read config '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_check(Context& ctx, const RunOptions& opt, std::ostream& out, std::ostream& err) {
  const Node& root = ctx.root;
  root.allow_only({"suite", "criteria", "output"});
  const std::string suite = root.text("suite");
  if (!suite.empty() && suite != "paper-limits") root.child("suite").fail("unknown suite '" + suite + "' (paper-limits)");
  AcceptanceOptions options;
  options.threads = ctx.threads;
  for (const auto& c : root.optional_child("criteria").elements()) {
    const double v = c.as_number();
    if (v != std::floor(v) || v < 1 || v > 11) {
      c.fail("criteria are numbered 1 to 11");
      continue;
    }
    options.only.push_back(static_cast<int>(v));
  }
  const Node o = root.optional_child("output");
  o.allow_only({"path"});
  const std::string file = o ? o.text_or("path", "check_report.json") : "check_report.json";
  ctx.checkpoint();

  const auto results = run_acceptance(options);
  ojson report = {{"suite", suite}, {"config", opt.config}, {"threads", ctx.threads}};
  ojson list = ojson::array();
  bool ok = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS" : "FAIL") << "  " << r.id << "  " << r.name << "\n";
    ojson metrics = ojson::array();
    for (const auto& m : r.metrics)
      metrics.push_back({{"name", m.name}, {"value", m.value}, {"limit", m.limit}, {"exact", m.exact}, {"passed", m.passed()}});
    list.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"seconds", r.seconds},
                    {"max_imag_residue", r.max_imag_residue}, {"metrics", metrics}, {"detail", r.detail}});
    ok = ok && r.passed;
  }
  report["passed"] = ok;
  report["criteria"] = list;
  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  write_text(dir / file, report.dump(2) + "\n");
  err << "check report written to " << (dir / file).string() << "\n";
  return ok ? kSuccess : kFailure;
}

int run_scenario(Context& ctx, const RunOptions& opt, std::ostream& err) {
  const std::string kind = ctx.root.text("kind");
  if (!kind.empty() && std::find(kKinds.begin(), kKinds.end(), kind) == kKinds.end()) {
    std::string names;
    for (const auto& k : kKinds) names += (names.empty() ? "" : ", ") + k;
    ctx.root.child("kind").fail("unknown kind '" + kind + "' (" + names + ")");
  }
  ctx.checkpoint();
  Output result;
  if (kind == "toa" || kind == "toa-moving" || kind == "toa-quadratic") {
    result = run_scalar(ctx, kind);
  } else if (kind == "photo") {
    result = run_photo(ctx);
  } else if (kind == "glauber") {
    result = run_glauber(ctx);
  } else if (kind == "spin") {
    result = run_spin(ctx);
  } else if (kind == "coincidence") {
    result = run_coincidence(ctx);
  } else {
    result = run_degradation(ctx);
  }

  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  ojson outputs = ojson::array();
  for (const auto& t : result.tables) {
    write_table(dir, t);
    outputs.push_back({{"path", t.file}, {"columns", t.columns}, {"rows", t.rows.size()}});
  }
  ojson meta = {
      {"tool", "rqdet"},
      {"kind", kind},
      {"config", opt.config},
      {"outputs", outputs},
      {"units", "natural units, hbar = c = 1; tau, Q and s in inverse units of k"},
      {"grid", result.grid},
      {"threads", ctx.threads},
      {"error_estimates", {{"max_imag_residue", result.max_imag_residue}, {"imag_residue_limit", kImagResidueTolerance}}},
      {"warnings", warning_list(ctx.warnings)},
      {"advisories", warning_list(ctx.advisories)},
      {"results", result.results},
  };
  const fs::path first(result.tables.front().file);
  const fs::path meta_path = dir / first.parent_path() / (first.stem().string() + ".meta.json");
  write_text(meta_path, meta.dump(2) + "\n");

  summarize(ctx.warnings, "warning", err);
  summarize(ctx.advisories, "advisory", err);
  err << "wrote " << (dir / first).string() << " and " << meta_path.string() << "\n";
  if (opt.strict_warnings && !ctx.warnings.empty()) {
    err << "error: numerical warnings raised with --strict-warnings\n";
    return kStrictWarnings;
  }
  return kSuccess;
}

}  // namespace

int run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  try {
    json doc;
    try {
      doc = json::parse(read_file(options.config));
    } catch (const json::parse_error& e) {
      err << "error: " << options.config << " is not valid JSON: " << e.what() << "\n";
      return kValidation;
    }
    Issues issues;
    Context ctx{Node(&doc, "$", issues), fs::path(options.config).parent_path(), resolve_thread_count(options.threads), {}, {}};
    if (!doc.is_object()) {
      err << "error: $: expected an object\n";
      return kValidation;
    }
    if (options.check) return run_check(ctx, options, out, err);
    if (doc.contains("suite") && !doc.contains("kind")) {
      err << "error: $: acceptance-suite file; run it with --check\n";
      return kValidation;
    }
    return run_scenario(ctx, options, err);
  } catch (const ConfigError& e) {
    err << "error: invalid config " << options.config << "\n";
    for (const auto& s : e.items()) err << "  " << s << "\n";
    return kValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

int main(int argc, char** argv) {
  CLI::App app{"Relativistic detector-model densities from declarative scenario files"};
  app.require_subcommand(1);
  RunOptions options;
  auto* cmd = app.add_subcommand("run", "Evaluate one scenario (or, with --check, the acceptance suite)");
  cmd->add_option("config", options.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_flag("--check", options.check, "Run the acceptance suite named by the config and write a JSON report");
  cmd->add_option("--out", options.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--threads", options.threads, "Worker threads (default: RQDET_THREADS, then all cores)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--strict-warnings", options.strict_warnings, "Exit with status 3 if any numerical warning is raised");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kValidation;
  }
  return run(options, std::cout, std::cerr);
}

}  // namespace rqdet::cli
