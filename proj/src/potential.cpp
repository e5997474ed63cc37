#include "fga/potential.hpp"

#include "fga/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace fga {

namespace {

IVec negate(const IVec& k) { return {-k[0], -k[1]}; }

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (trim(s.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::kConfig, "cannot parse number '" + s + "' in " + context);
}

}  // namespace

PeriodicPotential::PeriodicPotential(int dim, std::map<IVec, cplx> coefficients, int cutoff)
    : dim_(dim), coefficients_(std::move(coefficients)) {
  if (dim < 1 || dim > kMaxDim) fail(ErrorKind::kInvalidInput, "potential dimension must be 1 or 2");
  int inferred = 0;
  for (auto& [k, v] : coefficients_) {
    if (dim == 1 && k[1] != 0) fail(ErrorKind::kInvalidInput, "1D potential with a k_2 component");
    inferred = std::max({inferred, std::abs(k[0]), std::abs(k[1])});
  }
  if (cutoff >= 0 && cutoff < inferred) {
    fail(ErrorKind::kInvalidInput,
         "declared K_V=" + std::to_string(cutoff) + " below stored |k|=" + std::to_string(inferred));
  }
  cutoff_ = cutoff >= 0 ? cutoff : inferred;
}

PeriodicPotential PeriodicPotential::zero(int dim) { return PeriodicPotential(dim, {}, 0); }

PeriodicPotential PeriodicPotential::cosine(int dim, double amplitude, int axis) {
  IVec plus{0, 0};
  plus[axis] = 1;
  std::map<IVec, cplx> c;
  c[plus] = amplitude / 2;
  c[negate(plus)] = amplitude / 2;
  return PeriodicPotential(dim, std::move(c));
}

cplx PeriodicPotential::coefficient(const IVec& k) const {
  const auto it = coefficients_.find(k);
  return it == coefficients_.end() ? cplx{} : it->second;
}

double PeriodicPotential::hermitian_defect() const {
  double defect = 0.0;
  for (const auto& [k, v] : coefficients_) {
    defect = std::max(defect, std::abs(coefficient(negate(k)) - std::conj(v)));
  }
  return defect;
}

bool PeriodicPotential::is_hermitian(double tol) const {
  double scale = 1.0;
  for (const auto& [k, v] : coefficients_) scale = std::max(scale, std::abs(v));
  return hermitian_defect() <= tol * scale;
}

double PeriodicPotential::operator()(const Vec& X) const {
  double sum = 0.0;
  for (const auto& [k, v] : coefficients_) {
    double phase = 0.0;
    for (int a = 0; a < dim_; ++a) phase += kTwoPi * k[a] * X[a];
    sum += (v * cplx(std::cos(phase), std::sin(phase))).real();
  }
  return sum;
}

PeriodicPotential PeriodicPotential::parse(std::istream& in) {
  int dim = -1;
  int cutoff = -1;
  std::map<IVec, cplx> coeffs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    const std::string where = "potential line " + std::to_string(lineno);
    if (tok[0] == "d") {
      if (tok.size() != 2) fail(ErrorKind::kConfig, where + ": expected 'd <dim>'");
      dim = static_cast<int>(to_double(tok[1], where));
      continue;
    }
    if (tok[0] == "K_V") {
      if (tok.size() != 2) fail(ErrorKind::kConfig, where + ": expected 'K_V <cutoff>'");
      cutoff = static_cast<int>(to_double(tok[1], where));
      continue;
    }
    if (dim < 1) fail(ErrorKind::kConfig, where + ": coefficient before 'd' header");
    if (static_cast<int>(tok.size()) != dim + 2) {
      fail(ErrorKind::kConfig, where + ": expected " + std::to_string(dim + 2) + " fields");
    }
    IVec k{0, 0};
    for (int a = 0; a < dim; ++a) k[a] = static_cast<int>(to_double(tok[a], where));
    coeffs[k] += cplx(to_double(tok[dim], where), to_double(tok[dim + 1], where));
  }
  if (dim < 1) fail(ErrorKind::kConfig, "potential text lacks a 'd' header");
  PeriodicPotential v(dim, std::move(coeffs), cutoff);
  if (!v.is_hermitian(1e-12)) {
    fail(ErrorKind::kInvalidInput, "potential coefficients violate Vhat_{-k} = conj(Vhat_k)");
  }
  return v;
}

PeriodicPotential PeriodicPotential::parse(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

std::string PeriodicPotential::serialize() const {
  std::ostringstream os;
  os << "d " << dim_ << "\nK_V " << cutoff_ << "\n";
  for (const auto& [k, v] : coefficients_) {
    for (int a = 0; a < dim_; ++a) os << k[a] << ' ';
    os << fmt(v.real()) << ' ' << fmt(v.imag()) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

ExternalPotential ExternalPotential::harmonic(int dim, double omega, double center) {
  ExternalPotential u(dim);
  for (int a = 0; a < dim; ++a) {
    PolyTerm t;
    t.axis = a;
    t.center = center;
    t.coeff[2] = omega * omega;
    u.add(t);
  }
  return u;
}

ExternalPotential& ExternalPotential::add(PolyTerm term) {
  if (term.axis < 0 || term.axis >= dim_) fail(ErrorKind::kInvalidInput, "poly term axis out of range");
  poly_.push_back(term);
  return *this;
}

ExternalPotential& ExternalPotential::add(CosTerm term) {
  if (term.wavevector.size() != dim_) fail(ErrorKind::kInvalidInput, "cos term wavevector dimension");
  cos_.push_back(std::move(term));
  return *this;
}

namespace {

// m-th derivative of sum_j c_j s^j / j! with respect to s.
double poly_derivative(const std::array<double, 5>& c, double s, int m) {
  double sum = 0.0;
  double pow = 1.0;  // s^(j-m) / (j-m)!
  for (int j = m; j <= 4; ++j) {
    sum += c[j] * pow;
    pow = pow * s / (j - m + 1);
  }
  return sum;
}

// d^m/dphi^m cos(phi)
double cos_derivative(double phi, int m) {
  switch (m % 4) {
    case 0: return std::cos(phi);
    case 1: return -std::sin(phi);
    case 2: return -std::cos(phi);
    default: return std::sin(phi);
  }
}

}  // namespace

double ExternalPotential::value(const Vec& x) const {
  double u = 0.0;
  for (const auto& t : poly_) u += poly_derivative(t.coeff, x[t.axis] - t.center, 0);
  for (const auto& t : cos_) u += t.amplitude * std::cos(t.wavevector.dot(x) + t.phase);
  return u;
}

Vec ExternalPotential::gradient(const Vec& x) const {
  Vec g = Vec::Zero(dim_);
  for (const auto& t : poly_) g[t.axis] += poly_derivative(t.coeff, x[t.axis] - t.center, 1);
  for (const auto& t : cos_) {
    g += t.amplitude * cos_derivative(t.wavevector.dot(x) + t.phase, 1) * t.wavevector;
  }
  return g;
}

Mat ExternalPotential::hessian(const Vec& x) const {
  Mat h = Mat::Zero(dim_, dim_);
  for (const auto& t : poly_) h(t.axis, t.axis) += poly_derivative(t.coeff, x[t.axis] - t.center, 2);
  for (const auto& t : cos_) {
    h += t.amplitude * cos_derivative(t.wavevector.dot(x) + t.phase, 2) * t.wavevector *
         t.wavevector.transpose();
  }
  return h;
}

Tensor3 ExternalPotential::third(const Vec& x) const {
  Tensor3 r{};
  for (const auto& t : poly_) {
    r[t3(t.axis, t.axis, t.axis)] += poly_derivative(t.coeff, x[t.axis] - t.center, 3);
  }
  for (const auto& t : cos_) {
    const double f = t.amplitude * cos_derivative(t.wavevector.dot(x) + t.phase, 3);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j)
        for (int k = 0; k < dim_; ++k)
          r[t3(i, j, k)] += f * t.wavevector[i] * t.wavevector[j] * t.wavevector[k];
  }
  return r;
}

Tensor4 ExternalPotential::fourth(const Vec& x) const {
  Tensor4 r{};
  for (const auto& t : poly_) {
    r[t4(t.axis, t.axis, t.axis, t.axis)] += poly_derivative(t.coeff, x[t.axis] - t.center, 4);
  }
  for (const auto& t : cos_) {
    const double f = t.amplitude * cos_derivative(t.wavevector.dot(x) + t.phase, 4);
    const auto& k = t.wavevector;
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j)
        for (int a = 0; a < dim_; ++a)
          for (int b = 0; b < dim_; ++b) r[t4(i, j, a, b)] += f * k[i] * k[j] * k[a] * k[b];
  }
  return r;
}

bool ExternalPotential::subquadratic() const {
  return std::none_of(poly_.begin(), poly_.end(),
                      [](const PolyTerm& t) { return t.coeff[3] != 0.0 || t.coeff[4] != 0.0; });
}

std::array<double, 3> ExternalPotential::derivative_bounds() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Order m of a polynomial piece is bounded iff every coefficient above m vanishes.
  std::array<std::array<double, 3>, kMaxDim> per_axis{};
  for (const auto& t : poly_) {
    for (int m = 2; m <= 4; ++m) {
      auto& slot = per_axis[t.axis][m - 2];
      bool bounded = true;
      for (int j = m + 1; j <= 4; ++j) bounded = bounded && t.coeff[j] == 0.0;
      slot = bounded ? slot + std::abs(t.coeff[m]) : inf;
    }
  }
  std::array<double, 3> b{0.0, 0.0, 0.0};
  for (int a = 0; a < kMaxDim; ++a)
    for (int m = 0; m < 3; ++m) b[m] = std::max(b[m], per_axis[a][m]);
  for (const auto& t : cos_) {
    const double kn = t.wavevector.norm();
    const double amp = std::abs(t.amplitude);
    for (int m = 0; m < 3; ++m) b[m] += amp * std::pow(kn, m + 2);
  }
  return b;
}

namespace {

std::map<std::string, std::string> parse_args(const std::string& body, const std::string& term) {
  std::map<std::string, std::string> args;
  std::istringstream is(body);
  for (std::string item; std::getline(is, item, ',');) {
    item = trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kConfig, "expected key=value in '" + term + "'");
    args[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  return args;
}

}  // namespace

ExternalPotential ExternalPotential::parse(const std::string& spec, int dim) {
  ExternalPotential u(dim);
  std::istringstream is(spec);
  for (std::string term; std::getline(is, term, '+');) {
    term = trim(term);
    if (term.empty() || term == "zero" || term == "0") continue;
    const auto open = term.find('(');
    const auto close = term.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
      fail(ErrorKind::kConfig, "malformed potential term '" + term + "'");
    }
    const std::string name = trim(term.substr(0, open));
    auto args = parse_args(term.substr(open + 1, close - open - 1), term);
    auto num = [&](const std::string& key, double dflt) {
      const auto it = args.find(key);
      return it == args.end() ? dflt : to_double(it->second, term);
    };
    if (name == "poly") {
      PolyTerm t;
      t.axis = static_cast<int>(num("axis", 0));
      t.center = num("center", 0.0);
      for (int m = 0; m <= 4; ++m) t.coeff[m] = num("c" + std::to_string(m), 0.0);
      if (t.axis < 0 || t.axis >= dim) fail(ErrorKind::kConfig, "poly axis out of range in '" + term + "'");
      u.add(t);
    } else if (name == "harmonic") {
      const auto h = harmonic(dim, num("omega", 1.0), num("center", 0.0));
      for (const auto& t : h.poly_) u.add(t);
    } else if (name == "cos") {
      CosTerm t;
      t.amplitude = num("amp", 0.0);
      t.phase = num("phase", 0.0);
      t.wavevector = Vec::Zero(dim);
      std::istringstream ks(args.count("k") ? args["k"] : "0");
      int a = 0;
      for (std::string c; std::getline(ks, c, ';'); ++a) {
        if (a >= dim) fail(ErrorKind::kConfig, "too many wavevector components in '" + term + "'");
        t.wavevector[a] = to_double(c, term);
      }
      u.add(t);
    } else {
      fail(ErrorKind::kConfig, "unknown potential term '" + name + "'");
    }
  }
  return u;
}

std::string ExternalPotential::to_string() const {
  std::ostringstream os;
  bool first = true;
  auto sep = [&] {
    if (!first) os << " + ";
    first = false;
  };
  for (const auto& t : poly_) {
    sep();
    os << "poly(axis=" << t.axis << ",center=" << fmt(t.center);
    for (int m = 0; m <= 4; ++m) {
      if (t.coeff[m] != 0.0) os << ",c" << m << "=" << fmt(t.coeff[m]);
    }
    os << ")";
  }
  for (const auto& t : cos_) {
    sep();
    os << "cos(amp=" << fmt(t.amplitude) << ",k=";
    for (int a = 0; a < dim_; ++a) os << (a ? ";" : "") << fmt(t.wavevector[a]);
    os << ",phase=" << fmt(t.phase) << ")";
  }
  if (first) os << "zero";
  return os.str();
}

}  // namespace fga
