#include "rmlab/sampling.hpp"
#include <limits>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rmlab {

SampleKind sample_kind_from_string(const std::string& s) {
  if (s == "iid_mc") return SampleKind::kIidMc;
  if (s == "grid") return SampleKind::kGrid;
  if (s == "gauss_legendre") return SampleKind::kGauss;
  throw std::invalid_argument("unknown sample kind: " + s);
}

std::string to_string(SampleKind k) {
  switch (k) {
    case SampleKind::kIidMc: return "iid_mc";
    case SampleKind::kGrid: return "grid";
    case SampleKind::kGauss: return "gauss_legendre";
  }
  return "?";
}

BoundaryAtlas box_boundary(const Box& box) {
  BoundaryAtlas atlas;
  atlas.d = box.d;
  for (int axis = 0; axis < box.d; ++axis) {
    for (int side = 0; side < 2; ++side) {
      Face f;
      f.axis = axis;
      f.upper = side == 1;
      f.geom = box;
      double c = side == 1 ? box.hi[axis] : box.lo[axis];
      f.geom.lo[axis] = c;
      f.geom.hi[axis] = c;
      f.measure = 1.0;
      for (int k = 0; k < box.d; ++k) {
        if (k != axis) f.measure *= box.side(k);
      }
      atlas.faces.push_back(f);
      atlas.total_measure += f.measure;
    }
  }
  return atlas;
}

SampleSet sample_interior(const Box& box, int m, SampleKind kind, const Rng& rng) {
  if (m < 1) throw std::invalid_argument("sample_interior: m < 1");
  SampleSet s;
  s.d = box.d;
  s.kind = kind;
  s.seed = rng.key();
  switch (kind) {
    case SampleKind::kIidMc: {
      s.pts.resize(m, box.d);
      s.w = Eigen::VectorXd::Constant(m, 1.0 / m);
      Rng r = rng;
      for (int i = 0; i < m; ++i) {
        for (int k = 0; k < box.d; ++k) s.pts(i, k) = r.uniform(box.lo[k], box.hi[k]);
      }
      break;
    }
    case SampleKind::kGrid: {
      if (box.d == 1) {
        s.pts.resize(m, 1);
        s.w = Eigen::VectorXd::Constant(m, 1.0 / m);
        for (int i = 1; i <= m; ++i) {
          s.pts(i - 1, 0) = box.lo[0] + box.side(0) * double(i) / double(m);
        }
      } else {
        int per = int(std::llround(std::pow(double(m), 1.0 / box.d)));
        if (per < 1) per = 1;
        long total = 1;
        for (int k = 0; k < box.d; ++k) total *= per;
        if (total != m) {
          throw std::invalid_argument("grid sampling needs m to be a perfect d-th power");
        }
        s.pts.resize(m, box.d);
        s.w = Eigen::VectorXd::Constant(m, 1.0 / m);
        std::array<int, 3> idx{0, 0, 0};
        for (int i = 0; i < m; ++i) {
          int rem = i;
          for (int k = box.d - 1; k >= 0; --k) {
            idx[k] = rem % per;
            rem /= per;
          }
          for (int k = 0; k < box.d; ++k) {
            s.pts(i, k) = box.lo[k] + box.side(k) * double(idx[k] + 1) / double(per);
          }
        }
      }
      break;
    }
    case SampleKind::kGauss: {
      int order = 8;
      int per_axis_pts = box.d == 1 ? m : int(std::llround(std::pow(double(m), 1.0 / box.d)));
      int panels = std::max(1, per_axis_pts / order);
      if (box.d == 1 && panels * order != m) {
        order = m <= 16 ? m : 8;
        panels = std::max(1, m / order);
        if (panels * order != m) {
          throw std::invalid_argument("gauss sampling needs m divisible by the panel order");
        }
      }
      Quadrature q = composite_gauss(box, order, panels);
      s.pts = q.pts;
      s.w = q.w / box.volume();  // Lebesgue -> probability weights (uniform density)
      break;
    }
  }
  return s;
}

SampleSet sample_boundary(const BoundaryAtlas& atlas, int m, SampleKind kind, const Rng& rng) {
  if (m < 1) throw std::invalid_argument("sample_boundary: m < 1");
  if (atlas.faces.empty()) throw std::invalid_argument("sample_boundary: empty atlas");
  SampleSet s;
  s.d = atlas.d;
  s.kind = kind;
  s.seed = rng.key();

  if (atlas.d == 1 && kind != SampleKind::kIidMc) {
    // the boundary is two atoms; the deterministic rule is the normalized
    // counting measure regardless of the requested budget
    s.pts.resize(atlas.faces.size(), 1);
    s.w = Eigen::VectorXd::Constant(Eigen::Index(atlas.faces.size()),
                                    1.0 / double(atlas.faces.size()));
    for (std::size_t i = 0; i < atlas.faces.size(); ++i) {
      s.pts(Eigen::Index(i), 0) = atlas.faces[i].geom.lo[atlas.faces[i].axis];
    }
    return s;
  }

  if (kind == SampleKind::kIidMc) {
    s.pts.resize(m, atlas.d);
    s.w = Eigen::VectorXd::Constant(m, 1.0 / m);
    Rng r = rng;
    for (int i = 0; i < m; ++i) {
      double pick = r.next_double() * atlas.total_measure;
      std::size_t fi = 0;
      double acc = 0.0;
      for (; fi < atlas.faces.size(); ++fi) {
        acc += atlas.faces[fi].measure;
        if (pick <= acc || fi == atlas.faces.size() - 1) break;
      }
      const Face& f = atlas.faces[fi];
      for (int k = 0; k < atlas.d; ++k) {
        s.pts(i, k) = k == f.axis ? f.geom.lo[k] : r.uniform(f.geom.lo[k], f.geom.hi[k]);
      }
    }
    return s;
  }

  // deterministic rules, d >= 2: budget split across faces by surface measure
  std::vector<Eigen::MatrixXd> pts;
  std::vector<Eigen::VectorXd> ws;
  Eigen::Index total = 0;
  for (const Face& f : atlas.faces) {
    int mf = std::max(1, int(std::llround(double(m) * f.measure / atlas.total_measure)));
    Box fb;  // the face as a (d-1)-box
    fb.d = atlas.d - 1;
    int j = 0;
    for (int k = 0; k < atlas.d; ++k) {
      if (k == f.axis) continue;
      fb.lo[j] = f.geom.lo[k];
      fb.hi[j] = f.geom.hi[k];
      ++j;
    }
    Eigen::MatrixXd fp;
    Eigen::VectorXd fw;
    if (kind == SampleKind::kGauss) {
      int order = 8;
      int per_axis = fb.d == 1 ? mf : int(std::llround(std::pow(double(mf), 1.0 / fb.d)));
      int panels = std::max(1, per_axis / order);
      Quadrature q = composite_gauss(fb, order, panels);
      fp = q.pts;
      fw = q.w / atlas.total_measure;  // probability weights wrt uniform boundary density
    } else {  // kGrid
      SampleSet inner = sample_interior(fb, mf, SampleKind::kGrid, rng);
      fp = inner.pts;
      fw = inner.w * (f.measure / atlas.total_measure);
    }
    Eigen::MatrixXd full(fp.rows(), atlas.d);
    int jj = 0;
    for (int k = 0; k < atlas.d; ++k) {
      if (k == f.axis) {
        full.col(k).setConstant(f.geom.lo[k]);
      } else {
        full.col(k) = fp.col(jj++);
      }
    }
    pts.push_back(std::move(full));
    ws.push_back(std::move(fw));
    total += pts.back().rows();
  }
  s.pts.resize(total, atlas.d);
  s.w.resize(total);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    s.pts.middleRows(at, pts[i].rows()) = pts[i];
    s.w.segment(at, ws[i].size()) = ws[i];
    at += pts[i].rows();
  }
  return s;
}

double discrete_norm(std::span<const double> values, std::span<const double> weights, double q) {
  if (values.size() != weights.size()) throw std::invalid_argument("discrete_norm: size mismatch");
  if (q <= 0.0) throw std::invalid_argument("discrete_norm: q must be positive");
  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    terms[i] = weights[i] * std::pow(std::abs(values[i]), q);
  }
  return std::pow(pairwise_sum(terms), 1.0 / q);
}

double discrete_norm(const std::function<double(std::span<const double>)>& f,
                     const SampleSet& s, double q) {
  std::vector<double> vals(s.pts.rows());
  std::array<double, 3> x{};
  for (Eigen::Index i = 0; i < s.pts.rows(); ++i) {
    for (int k = 0; k < s.d; ++k) x[k] = s.pts(i, k);
    vals[i] = f(std::span<const double>(x.data(), s.d));
  }
  return discrete_norm(vals, std::span<const double>(s.w.data(), std::size_t(s.w.size())), q);
}

void sample_to_csv(const SampleSet& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (int k = 0; k < s.d; ++k) out << "x" << k << ",";
  out << "weight\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < s.pts.rows(); ++i) {
    for (int k = 0; k < s.d; ++k) out << s.pts(i, k) << ",";
    out << s.w(i) << "\n";
  }
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_loglog_slope: need at least two points");
  }
  Eigen::MatrixXd a(Eigen::Index(x.size()), 2);
  Eigen::VectorXd b(Eigen::Index(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0) throw std::domain_error("fit_loglog_slope: nonpositive data");
    a(Eigen::Index(i), 0) = 1.0;
    a(Eigen::Index(i), 1) = std::log(x[i]);
    b(Eigen::Index(i)) = std::log(y[i]);
  }
  Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
  return coef(1);
}

McProbeResult mc_convergence_probe(const std::function<double(std::span<const double>)>& f,
                                   const Box& box, const std::vector<int>& m_list, int trials,
                                   const Rng& rng) {
  if (trials < 2) throw std::invalid_argument("mc_convergence_probe: trials < 2");
  McProbeResult out;
  out.reference = integrate_auto(f, box, 12, 1e-11).value / box.volume();
  std::vector<double> xs, ys;
  for (std::size_t mi = 0; mi < m_list.size(); ++mi) {
    const int m = m_list[mi];
    std::vector<double> errs(trials);
    for (int t = 0; t < trials; ++t) {
      SampleSet s = sample_interior(box, m, SampleKind::kIidMc,
                                    rng.fork(1000003 * (mi + 1) + std::uint64_t(t)));
      std::vector<double> terms(s.pts.rows());
      std::array<double, 3> x{};
      for (Eigen::Index i = 0; i < s.pts.rows(); ++i) {
        for (int k = 0; k < s.d; ++k) x[k] = s.pts(i, k);
        terms[i] = s.w(i) * f(std::span<const double>(x.data(), s.d));
      }
      errs[t] = std::abs(pairwise_sum(terms) - out.reference);
    }
    McProbeRow row;
    row.m = m;
    row.mean_abs_error = pairwise_sum(errs) / trials;
    double var = 0.0;
    for (double e : errs) var += (e - row.mean_abs_error) * (e - row.mean_abs_error);
    var /= double(trials - 1);
    row.stderr_of_mean = std::sqrt(var / trials);
    out.rows.push_back(row);
    xs.push_back(double(m));
    ys.push_back(std::max(row.mean_abs_error, 1e-300));
  }
  out.slope = xs.size() >= 2 ? fit_loglog_slope(xs, ys)
                             : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace rmlab
