#include "pdeforest/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

namespace pdeforest::data {

using std::numbers::pi;

std::string_view problem_name(Problem p) noexcept {
    switch (p) {
    case Problem::Burgers: return "burgers";
    case Problem::KdV: return "kdv";
    case Problem::ChafeeInfante: return "chafee_infante";
    case Problem::PdeDivide: return "pde_divide";
    case Problem::PdeCompound: return "pde_compound";
    }
    return "unknown";
}

std::optional<Problem> parse_problem(std::string_view name) noexcept {
    for (Problem p : kAllProblems)
        if (problem_name(p) == name) return p;
    return std::nullopt;
}

// ---- configuration ----------------------------------------------------------

Boundary SolverConfig::boundary() const noexcept {
    return problem == Problem::Burgers || problem == Problem::KdV ? Boundary::Periodic : Boundary::Dirichlet;
}

double SolverConfig::dx() const noexcept {
    const double span = x_max - x_min;
    return boundary() == Boundary::Periodic ? span / nx : span / (nx - 1);
}

Eigen::VectorXd SolverConfig::x_axis() const {
    Eigen::VectorXd x(nx);
    const double h = dx();
    for (int i = 0; i < nx; ++i) x(i) = x_min + i * h;
    return x;
}

Eigen::VectorXd SolverConfig::t_axis() const {
    Eigen::VectorXd t(nt_store);
    for (int j = 0; j < nt_store; ++j) t(j) = static_cast<double>(j) * subsample_every * dt_internal;
    return t;
}

double SolverConfig::param(const std::string &name) const {
    auto it = params.find(name);
    if (it == params.end())
        throw std::invalid_argument(std::string(problem_name(problem)) + " requires parameter '" + name + "'");
    return it->second;
}

namespace {

// RK4's stability boundary on the imaginary axis is 2*sqrt(2); the central
// third-derivative stencil has spectral radius 3*sqrt(3)/(2 dx^3). Their
// ratio is 1.089, so C = 1 keeps a margin.
constexpr double kKdvDispersiveC = 1.0;
constexpr double kRk4ImagAxis = 2.8284271247461903;

double max_abs(const Eigen::VectorXd &v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

} // namespace

double SolverConfig::stability_limit() const {
    const double h = dx();
    const double amp = std::max(max_abs(initial_condition(*this)), 1e-12);
    switch (problem) {
    case Problem::Burgers: {
        const double nu = param("nu");
        if (nu <= 0.0) throw std::invalid_argument("burgers requires nu > 0");
        // diffusive bound, and the forward-Euler bound for central advection
        return std::min(h * h / (2.0 * nu), 2.0 * nu / (amp * amp));
    }
    case Problem::KdV: {
        const double a = param("a");
        const double b = param("b");
        double limit = kRk4ImagAxis * h / std::max(std::abs(a) * amp, 1e-12);
        if (b != 0.0) limit = std::min(limit, kKdvDispersiveC * h * h * h / std::abs(b));
        return limit;
    }
    case Problem::ChafeeInfante: return h * h / 2.0;
    case Problem::PdeDivide: {
        const double diffusivity = 0.25;
        const double speed = 1.0 / std::min(std::abs(x_min), std::abs(x_max));
        return std::min(h * h / (2.0 * diffusivity), 2.0 * diffusivity / (speed * speed));
    }
    case Problem::PdeCompound: return h * h / (2.0 * amp);
    }
    return 0.0;
}

void SolverConfig::check() const {
    if (nx < 5) throw std::invalid_argument("nx must be >= 5");
    if (nt_store < 5) throw std::invalid_argument("nt_store must be >= 5");
    if (!(x_max > x_min)) throw std::invalid_argument("x_max must exceed x_min");
    if (!(dt_internal > 0.0)) throw std::invalid_argument("dt_internal must be > 0");
    if (subsample_every < 1) throw std::invalid_argument("subsample_every must be >= 1");
    if (problem == Problem::PdeDivide && x_min <= 0.0 && x_max >= 0.0)
        throw std::invalid_argument("pde_divide domain must exclude x = 0");
    const double span = static_cast<double>(nt_store - 1) * subsample_every * dt_internal;
    if (span > t_max * (1.0 + 1e-9))
        throw std::invalid_argument("nt_store * subsample_every steps overrun t_max");
    const double limit = stability_limit();
    if (dt_internal > limit) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "dt_internal %.6g exceeds the stability limit %.6g for %s", dt_internal,
                      limit, std::string(problem_name(problem)).c_str());
        throw StabilityError(buf);
    }
}

SolverError::SolverError(long step, const std::string &what)
    : std::runtime_error(what + " at internal step " + std::to_string(step)), step_(step) {}

SolverConfig preset(Problem p) {
    SolverConfig c;
    c.problem = p;
    switch (p) {
    case Problem::Burgers:
        c.nx = 256, c.x_min = -8.0, c.x_max = 8.0;
        c.nt_store = 201, c.dt_internal = 2.5e-4, c.subsample_every = 200;
        c.params = {{"nu", 0.1}};
        break;
    case Problem::KdV:
        c.nx = 512, c.x_min = -1.0, c.x_max = 1.0;
        c.nt_store = 201, c.dt_internal = 5e-6, c.subsample_every = 1000;
        c.params = {{"a", -1.0}, {"b", -0.0025}};
        break;
    case Problem::ChafeeInfante:
        c.nx = 301, c.x_min = 0.0, c.x_max = 3.0;
        c.nt_store = 200, c.dt_internal = 1e-5, c.subsample_every = 200;
        c.params = {{"a", 1.0}};
        break;
    case Problem::PdeDivide:
    case Problem::PdeCompound:
        c.nx = 100, c.x_min = 1.0, c.x_max = 2.0;
        c.nt_store = 251, c.dt_internal = 1e-5, c.subsample_every = 1000;
        break;
    }
    c.t_max = static_cast<double>(c.nt_store - 1) * c.subsample_every * c.dt_internal;
    return c;
}

Eigen::VectorXd initial_condition(const SolverConfig &cfg) {
    const Eigen::VectorXd x = cfg.x_axis();
    Eigen::VectorXd u(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = x(i);
        switch (cfg.problem) {
        case Problem::Burgers:
        case Problem::KdV: u(i) = std::cos(pi * xi); break;
        case Problem::ChafeeInfante:
            u(i) = std::sin(pi * xi / 3.0) * (1.0 + 0.5 * std::cos(2.0 * pi * xi / 3.0));
            break;
        case Problem::PdeDivide:
        case Problem::PdeCompound: u(i) = -std::sin(pi * xi); break;
        }
    }
    if (cfg.boundary() == Boundary::Dirichlet) {
        u(0) = 0.0;
        u(u.size() - 1) = 0.0;
    }
    return u;
}

// ---- time stepping ----------------------------------------------------------

namespace {

// Right-hand side of the semi-discrete system. `g` carries two ghost cells on
// each side; for periodic problems they are filled by wrap-around.
class Rhs {
public:
    explicit Rhs(const SolverConfig &cfg)
        : cfg_(cfg), n_(cfg.nx), h_(cfg.dx()), x_(cfg.x_axis()), g_(static_cast<std::size_t>(cfg.nx) + 4) {
        switch (cfg.problem) {
        case Problem::Burgers: nu_ = cfg.param("nu"); break;
        case Problem::KdV:
            a_ = cfg.param("a");
            b_ = cfg.param("b");
            break;
        case Problem::ChafeeInfante: a_ = cfg.param("a"); break;
        default: break;
        }
    }

    void operator()(const std::vector<double> &u, std::vector<double> &out) {
        const std::size_t n = static_cast<std::size_t>(n_);
        std::copy(u.begin(), u.end(), g_.begin() + 2);
        if (cfg_.boundary() == Boundary::Periodic) {
            g_[0] = u[n - 2], g_[1] = u[n - 1];
            g_[n + 2] = u[0], g_[n + 3] = u[1];
        }
        const double *g = g_.data() + 2; // g[i] == u[i], g[-2..n+1] valid
        const double inv2h = 1.0 / (2.0 * h_);
        const double inv4h = 1.0 / (4.0 * h_);
        const double invh2 = 1.0 / (h_ * h_);
        const double inv2h3 = 1.0 / (2.0 * h_ * h_ * h_);

        const bool periodic = cfg_.boundary() == Boundary::Periodic;
        const long lo = periodic ? 0 : 1;
        const long hi = periodic ? n_ : n_ - 1;
        if (!periodic) out[0] = out[n - 1] = 0.0;

        switch (cfg_.problem) {
        case Problem::Burgers:
            for (long i = lo; i < hi; ++i) {
                const double flux = (g[i + 1] * g[i + 1] - g[i - 1] * g[i - 1]) * inv4h;
                out[static_cast<std::size_t>(i)] = -flux + nu_ * (g[i + 1] - 2.0 * g[i] + g[i - 1]) * invh2;
            }
            break;
        case Problem::KdV:
            for (long i = lo; i < hi; ++i) {
                const double flux = (g[i + 1] * g[i + 1] - g[i - 1] * g[i - 1]) * inv4h;
                const double third = (g[i + 2] - 2.0 * g[i + 1] + 2.0 * g[i - 1] - g[i - 2]) * inv2h3;
                out[static_cast<std::size_t>(i)] = a_ * flux + b_ * third;
            }
            break;
        case Problem::ChafeeInfante:
            for (long i = lo; i < hi; ++i) {
                const double ui = g[i];
                out[static_cast<std::size_t>(i)] =
                    (g[i + 1] - 2.0 * ui + g[i - 1]) * invh2 - a_ * ui + a_ * ui * ui * ui;
            }
            break;
        case Problem::PdeDivide:
            for (long i = lo; i < hi; ++i) {
                const double ux = (g[i + 1] - g[i - 1]) * inv2h;
                const double uxx = (g[i + 1] - 2.0 * g[i] + g[i - 1]) * invh2;
                out[static_cast<std::size_t>(i)] = -ux / x_(i) + 0.25 * uxx;
            }
            break;
        case Problem::PdeCompound:
            // (u u_x)_x = (u^2)_xx / 2
            for (long i = lo; i < hi; ++i)
                out[static_cast<std::size_t>(i)] =
                    (g[i + 1] * g[i + 1] - 2.0 * g[i] * g[i] + g[i - 1] * g[i - 1]) * 0.5 * invh2;
            break;
        }
    }

private:
    const SolverConfig &cfg_;
    long n_;
    double h_;
    Eigen::VectorXd x_;
    std::vector<double> g_;
    double nu_ = 0.0, a_ = 0.0, b_ = 0.0;
};

class Stepper {
public:
    explicit Stepper(const SolverConfig &cfg)
        : rhs_(cfg), dt_(cfg.dt_internal), rk4_(cfg.problem == Problem::KdV),
          k1_(static_cast<std::size_t>(cfg.nx)), k2_(k1_), k3_(k1_), k4_(k1_), tmp_(k1_) {}

    void step(std::vector<double> &u) {
        const std::size_t n = u.size();
        rhs_(u, k1_);
        if (!rk4_) {
            for (std::size_t i = 0; i < n; ++i) u[i] += dt_ * k1_[i];
            return;
        }
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = u[i] + 0.5 * dt_ * k1_[i];
        rhs_(tmp_, k2_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = u[i] + 0.5 * dt_ * k2_[i];
        rhs_(tmp_, k3_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = u[i] + dt_ * k3_[i];
        rhs_(tmp_, k4_);
        const double w = dt_ / 6.0;
        for (std::size_t i = 0; i < n; ++i) u[i] += w * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

private:
    Rhs rhs_;
    double dt_;
    bool rk4_;
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

} // namespace

eval::Field solve_field(const SolverConfig &cfg) {
    cfg.check();
    const Eigen::VectorXd u0 = initial_condition(cfg);
    std::vector<double> u(u0.data(), u0.data() + u0.size());

    eval::Field out(cfg.nx, cfg.nt_store);
    out.col(0) = u0.array();
    Stepper stepper(cfg);
    long step = 0;
    for (int j = 1; j < cfg.nt_store; ++j) {
        for (int s = 0; s < cfg.subsample_every; ++s) {
            stepper.step(u);
            ++step;
        }
        for (double v : u)
            if (!std::isfinite(v)) throw SolverError(step, "non-finite value in solution");
        out.col(j) = Eigen::Map<const Eigen::ArrayXd>(u.data(), cfg.nx);
    }
    return out;
}

eval::Dataset solve(const SolverConfig &cfg) {
    return eval::make_dataset(solve_field(cfg), cfg.x_axis(), cfg.t_axis());
}

// ---- dataset files ----------------------------------------------------------

DatasetMetadata metadata_for(const SolverConfig &cfg) {
    DatasetMetadata m;
    m.problem = std::string(problem_name(cfg.problem));
    m.params = cfg.params;
    return m;
}

namespace {

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename Row>
void write_row(std::ostream &os, const Row &values, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i) os << ',';
        os << fmt17(values(i));
    }
    os << '\n';
}

std::vector<double> parse_row(const std::string &line, std::size_t line_no) {
    std::vector<double> out;
    const char *p = line.data();
    const char *end = p + line.size();
    while (p < end) {
        double v = 0.0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc())
            throw DatasetFileError(DatasetFileError::Kind::Value,
                                   "bad number on line " + std::to_string(line_no));
        out.push_back(v);
        p = next;
        if (p < end) {
            if (*p != ',')
                throw DatasetFileError(DatasetFileError::Kind::Value,
                                       "expected ',' on line " + std::to_string(line_no));
            ++p;
        }
    }
    return out;
}

long header_int(const std::map<std::string, std::string> &h, const std::string &key) {
    const std::string &s = h.at(key);
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v <= 0)
        throw DatasetFileError(DatasetFileError::Kind::Header, "header key '" + key + "' is not a positive integer");
    return v;
}

std::map<std::string, double> parse_params(const std::string &s) {
    std::map<std::string, double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw DatasetFileError(DatasetFileError::Kind::Header, "malformed params entry '" + item + "'");
        double v = 0.0;
        const std::string num = item.substr(colon + 1);
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
        if (ec != std::errc() || p != num.data() + num.size())
            throw DatasetFileError(DatasetFileError::Kind::Header, "malformed params value '" + item + "'");
        out[item.substr(0, colon)] = v;
    }
    return out;
}

} // namespace

void write_dataset(const eval::Dataset &d, const std::filesystem::path &path, const DatasetMetadata &meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DatasetFileError(DatasetFileError::Kind::Io, "cannot open '" + path.string() + "' for writing");

    std::string params;
    for (const auto &[k, v] : meta.params) {
        if (!params.empty()) params += ';';
        params += k + ":" + fmt17(v);
    }
    os << "# schema=" << kSchemaVersion << '\n'
       << "# problem=" << meta.problem << '\n'
       << "# nx=" << d.nx() << '\n'
       << "# nt=" << d.nt() << '\n'
       << "# dx=" << fmt17(d.dx()) << '\n'
       << "# dt=" << fmt17(d.dt()) << '\n'
       << "# params=" << params << '\n'
       << "# generator=" << meta.generator << '\n';
    write_row(os, d.x(), d.nx());
    write_row(os, d.t(), d.nt());
    for (Eigen::Index i = 0; i < d.nx(); ++i) write_row(os, d.u().row(i), d.nt());
    if (!os) throw DatasetFileError(DatasetFileError::Kind::Io, "write to '" + path.string() + "' failed");
}

LoadedDataset read_dataset_file(const std::filesystem::path &path, int boundary_trim) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DatasetFileError(DatasetFileError::Kind::Io, "cannot open '" + path.string() + "'");

    std::map<std::string, std::string> header;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (!rows.empty())
                throw DatasetFileError(DatasetFileError::Kind::Header,
                                       "header line after data on line " + std::to_string(line_no));
            std::string body = line.substr(1);
            body.erase(0, body.find_first_not_of(' '));
            const auto eq = body.find('=');
            if (eq == std::string::npos)
                throw DatasetFileError(DatasetFileError::Kind::Header,
                                       "header line " + std::to_string(line_no) + " is not key=value");
            header[body.substr(0, eq)] = body.substr(eq + 1);
            continue;
        }
        rows.push_back(parse_row(line, line_no));
    }

    for (const char *key : {"schema", "problem", "nx", "nt", "dx", "dt", "params"})
        if (!header.count(key))
            throw DatasetFileError(DatasetFileError::Kind::Header, std::string("missing header key '") + key + "'");
    if (header_int(header, "schema") != kSchemaVersion)
        throw DatasetFileError(DatasetFileError::Kind::Header, "unsupported schema " + header["schema"]);

    const long nx = header_int(header, "nx");
    const long nt = header_int(header, "nt");
    if (static_cast<long>(rows.size()) != nx + 2)
        throw DatasetFileError(DatasetFileError::Kind::Shape, "expected " + std::to_string(nx + 2) +
                                                                  " data lines, found " + std::to_string(rows.size()));
    if (static_cast<long>(rows[0].size()) != nx)
        throw DatasetFileError(DatasetFileError::Kind::Shape, "x axis has " + std::to_string(rows[0].size()) +
                                                                  " values, header says " + std::to_string(nx));
    if (static_cast<long>(rows[1].size()) != nt)
        throw DatasetFileError(DatasetFileError::Kind::Shape, "t axis has " + std::to_string(rows[1].size()) +
                                                                  " values, header says " + std::to_string(nt));

    eval::Field u(nx, nt);
    for (long i = 0; i < nx; ++i) {
        const auto &r = rows[static_cast<std::size_t>(i) + 2];
        if (static_cast<long>(r.size()) != nt)
            throw DatasetFileError(DatasetFileError::Kind::Shape, "u row " + std::to_string(i) + " has " +
                                                                      std::to_string(r.size()) + " values, expected " +
                                                                      std::to_string(nt));
        for (long j = 0; j < nt; ++j) u(i, j) = r[static_cast<std::size_t>(j)];
    }
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(rows[0].data(), nx);
    const Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(rows[1].data(), nt);

    DatasetMetadata meta;
    meta.problem = header["problem"];
    meta.params = parse_params(header["params"]);
    if (header.count("generator")) meta.generator = header["generator"];

    try {
        return {eval::make_dataset(std::move(u), x, t, boundary_trim), std::move(meta)};
    } catch (const eval::DatasetError &e) {
        throw DatasetFileError(DatasetFileError::Kind::Shape, e.what());
    }
}

eval::Dataset read_dataset(const std::filesystem::path &path, int boundary_trim) {
    return read_dataset_file(path, boundary_trim).dataset;
}

} // namespace pdeforest::data
