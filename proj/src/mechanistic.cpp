#include "epikit/mechanistic.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>

#include "epikit/error.hpp"

namespace epikit {

std::string_view to_string(CompartmentModel m) noexcept {
    switch (m) {
        case CompartmentModel::SIR: return "sir";
        case CompartmentModel::SIS: return "sis";
        case CompartmentModel::SEIR: return "seir";
    }
    return "?";
}

CompartmentModel compartment_model_from_string(std::string_view s) {
    if (s == "sir") return CompartmentModel::SIR;
    if (s == "sis") return CompartmentModel::SIS;
    if (s == "seir") return CompartmentModel::SEIR;
    fail(ErrorKind::InvalidArgument, "unknown compartment model '" + std::string(s) + "' (expected sir|sis|seir)",
         "model");
}

std::string_view to_string(FitStatus s) noexcept {
    switch (s) {
        case FitStatus::Converged: return "converged";
        case FitStatus::MaxEvaluations: return "max_evaluations";
        case FitStatus::Unidentifiable: return "unidentifiable";
    }
    return "?";
}

void CompartmentParams::validate() const {
    auto ok = [](double x) { return std::isfinite(x) && x >= 0.0; };
    require(ok(beta), "beta must be finite and >= 0", "beta");
    require(ok(gamma), "gamma must be finite and >= 0", "gamma");
    require(ok(sigma), "sigma must be finite and >= 0", "sigma");
    require(std::isfinite(population) && population > 0.0, "population must be finite and > 0", "population");
}

const std::vector<double>& CompartmentTrajectory::series(Compartment c) const {
    for (std::size_t i = 0; i < compartments.size(); ++i)
        if (compartments[i] == c) return counts[i];
    fail(ErrorKind::InvalidArgument, "trajectory has no compartment " + std::string(to_string(c)));
}

double CompartmentTrajectory::total(std::size_t k) const noexcept {
    double s = 0.0;
    for (const auto& col : counts) s += col[k];
    return s;
}

namespace {

template <std::size_t D>
using State = std::array<double, D>;

/// Classic fixed-step RK4. The final step is shortened so the trajectory
/// ends exactly at `horizon`.
template <std::size_t D, class Rhs>
CompartmentTrajectory integrate_rk4(const Rhs& rhs, State<D> y, std::vector<Compartment> labels, double horizon,
                                    double dt, double population) {
    require(std::isfinite(dt) && dt > 0.0, "dt must be > 0", "dt");
    require(std::isfinite(horizon) && horizon >= dt, "horizon must be >= dt", "horizon");

    const auto full_steps = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
    const double remainder = horizon - static_cast<double>(full_steps) * dt;
    const bool tail = remainder > 1e-12 * horizon;
    const std::size_t n_samples = full_steps + 1 + (tail ? 1 : 0);

    CompartmentTrajectory traj;
    traj.compartments = std::move(labels);
    traj.times.reserve(n_samples);
    traj.counts.assign(D, {});
    for (auto& col : traj.counts) col.reserve(n_samples);

    const double dust = 1e-12 * population;
    auto record = [&](double t, const State<D>& s) {
        traj.times.push_back(t);
        for (std::size_t i = 0; i < D; ++i) traj.counts[i].push_back(s[i] < 0.0 && s[i] >= -dust ? 0.0 : s[i]);
    };

    auto step = [&](State<D>& s, double h) {
        State<D> k1, k2, k3, k4, tmp;
        rhs(s, k1);
        for (std::size_t i = 0; i < D; ++i) tmp[i] = s[i] + 0.5 * h * k1[i];
        rhs(tmp, k2);
        for (std::size_t i = 0; i < D; ++i) tmp[i] = s[i] + 0.5 * h * k2[i];
        rhs(tmp, k3);
        for (std::size_t i = 0; i < D; ++i) tmp[i] = s[i] + h * k3[i];
        rhs(tmp, k4);
        for (std::size_t i = 0; i < D; ++i) s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    };

    record(0.0, y);
    for (std::size_t k = 1; k <= full_steps; ++k) {
        step(y, dt);
        record(static_cast<double>(k) * dt, y);
    }
    if (tail) {
        step(y, remainder);
        record(horizon, y);
    }
    return traj;
}

void check_initial(std::initializer_list<double> counts, const CompartmentParams& params) {
    params.validate();
    double total = 0.0;
    for (double c : counts) {
        require(std::isfinite(c) && c >= 0.0, "initial counts must be finite and >= 0", "initial");
        total += c;
    }
    require(std::abs(total - params.population) <= 1e-9 * params.population,
            "initial compartments must sum to the population", "initial");
}

}  // namespace

CompartmentTrajectory simulate_sir(const CompartmentParams& p, double s0, double i0, double r0, double horizon,
                                   double dt) {
    check_initial({s0, i0, r0}, p);
    const double N = p.population;
    auto rhs = [&](const State<3>& y, State<3>& d) {
        const double infection = p.beta * y[0] * y[1] / N;
        const double recovery = p.gamma * y[1];
        d = {-infection, infection - recovery, recovery};
    };
    return integrate_rk4<3>(rhs, {s0, i0, r0}, {Compartment::S, Compartment::I, Compartment::R}, horizon, dt, N);
}

CompartmentTrajectory simulate_sis(const CompartmentParams& p, double s0, double i0, double horizon, double dt) {
    check_initial({s0, i0}, p);
    const double N = p.population;
    auto rhs = [&](const State<2>& y, State<2>& d) {
        const double net = p.beta * y[0] * y[1] / N - p.gamma * y[1];
        d = {-net, net};
    };
    return integrate_rk4<2>(rhs, {s0, i0}, {Compartment::S, Compartment::I}, horizon, dt, N);
}

CompartmentTrajectory simulate_seir(const CompartmentParams& p, double s0, double e0, double i0, double r0,
                                    double horizon, double dt) {
    check_initial({s0, e0, i0, r0}, p);
    const double N = p.population;
    auto rhs = [&](const State<4>& y, State<4>& d) {
        const double infection = p.beta * y[0] * y[2] / N;
        const double onset = p.sigma * y[1];
        const double recovery = p.gamma * y[2];
        d = {-infection, infection - onset, onset - recovery, recovery};
    };
    return integrate_rk4<4>(rhs, {s0, e0, i0, r0}, {Compartment::S, Compartment::E, Compartment::I, Compartment::R},
                            horizon, dt, N);
}

// -------------------------------------------------------------------- fitting

std::vector<double> sample_infected(CompartmentModel model, const CompartmentParams& params, double i0,
                                    std::size_t n_samples, double dt) {
    require(n_samples >= 1, "need at least one sample", "n_samples");
    const double per_unit = std::round(1.0 / dt);
    require(per_unit >= 1.0 && std::abs(per_unit * dt - 1.0) < 1e-9, "dt must divide one time unit", "dt");
    const auto stride = static_cast<std::size_t>(per_unit);
    if (n_samples == 1) return {i0};

    const double horizon = static_cast<double>(n_samples - 1);
    const double N = params.population;
    CompartmentTrajectory traj;
    switch (model) {
        case CompartmentModel::SIR: traj = simulate_sir(params, N - i0, i0, 0.0, horizon, dt); break;
        case CompartmentModel::SIS: traj = simulate_sis(params, N - i0, i0, horizon, dt); break;
        case CompartmentModel::SEIR: traj = simulate_seir(params, N - i0, 0.0, i0, 0.0, horizon, dt); break;
    }
    const auto& infected = traj.series(Compartment::I);
    std::vector<double> out(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) out[k] = infected[std::min(k * stride, infected.size() - 1)];
    return out;
}

namespace {

struct FitProblem {
    std::span<const double> observed;
    CompartmentModel model;
    CompartmentParams base;
    double dt;
    std::size_t evaluations = 0;

    std::size_t dims() const noexcept { return model == CompartmentModel::SEIR ? 3 : 2; }

    CompartmentParams params_from_log(const double* x) const {
        CompartmentParams p = base;
        p.beta = std::exp(x[0]);
        p.gamma = std::exp(x[1]);
        if (model == CompartmentModel::SEIR) p.sigma = std::exp(x[2]);
        return p;
    }

    double loss(const CompartmentParams& p) {
        ++evaluations;
        const auto sim = sample_infected(model, p, observed[0], observed.size(), dt);
        double acc = 0.0;
        for (std::size_t k = 0; k < observed.size(); ++k) {
            const double r = sim[k] - observed[k];
            acc += r * r;
        }
        const double mse = acc / static_cast<double>(observed.size());
        return std::isfinite(mse) ? mse : 1e300;
    }
};

double gsl_objective(const gsl_vector* x, void* data) {
    auto* problem = static_cast<FitProblem*>(data);
    return problem->loss(problem->params_from_log(x->data));
}

struct GslVectorDeleter {
    void operator()(gsl_vector* v) const noexcept { gsl_vector_free(v); }
};
struct GslMinimizerDeleter {
    void operator()(gsl_multimin_fminimizer* m) const noexcept { gsl_multimin_fminimizer_free(m); }
};

}  // namespace

FitResult fit_compartmental(std::span<const double> observed, CompartmentModel model, double population,
                            const CompartmentParams& init, double dt, const FitOptions& options) {
    require(observed.size() >= 5, "need at least 5 observations", "observed");
    double max_obs = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        require(std::isfinite(observed[k]), "observations must be finite", "observed[" + std::to_string(k) + "]");
        require(observed[k] >= 0.0, "observations must be >= 0", "observed[" + std::to_string(k) + "]");
        max_obs = std::max(max_obs, observed[k]);
    }
    require(std::isfinite(population) && population >= max_obs && population > 0.0,
            "population must be >= max observation", "population");

    CompartmentParams start = init;
    start.population = population;
    start.validate();

    FitProblem problem{observed, model, start, dt};
    FitResult result;
    result.params = start;
    result.init_loss = problem.loss(start);
    result.loss = result.init_loss;

    if (max_obs == 0.0) {
        result.status = FitStatus::Unidentifiable;
        result.evaluations = problem.evaluations;
        return result;
    }

    gsl_set_error_handler_off();
    const std::size_t dims = problem.dims();
    constexpr double kFloor = 1e-8;
    std::unique_ptr<gsl_vector, GslVectorDeleter> x(gsl_vector_alloc(dims));
    std::unique_ptr<gsl_vector, GslVectorDeleter> step(gsl_vector_alloc(dims));
    gsl_vector_set(x.get(), 0, std::log(std::max(start.beta, kFloor)));
    gsl_vector_set(x.get(), 1, std::log(std::max(start.gamma, kFloor)));
    if (dims == 3) gsl_vector_set(x.get(), 2, std::log(std::max(start.sigma, kFloor)));
    gsl_vector_set_all(step.get(), 0.5);

    gsl_multimin_function fn{&gsl_objective, dims, &problem};
    std::unique_ptr<gsl_multimin_fminimizer, GslMinimizerDeleter> minimizer(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dims));
    gsl_multimin_fminimizer_set(minimizer.get(), &fn, x.get(), step.get());

    FitStatus status = FitStatus::MaxEvaluations;
    // one simplex iteration costs at most dims + 2 evaluations (reflect,
    // expand or contract, then a possible shrink)
    while (problem.evaluations + dims + 2 <= options.max_evaluations) {
        if (gsl_multimin_fminimizer_iterate(minimizer.get()) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(minimizer.get()), options.simplex_tolerance) ==
            GSL_SUCCESS) {
            status = FitStatus::Converged;
            break;
        }
    }

    const double best = gsl_multimin_fminimizer_minimum(minimizer.get());
    if (best <= result.init_loss) {
        result.params = problem.params_from_log(gsl_multimin_fminimizer_x(minimizer.get())->data);
        result.loss = best;
    }
    result.status = status;
    result.evaluations = problem.evaluations;
    return result;
}

FitResult fit_compartmental(const FeaturePanel& observed, CompartmentModel model, double population,
                            const CompartmentParams& init, double dt, const FitOptions& options) {
    require(observed.n_nodes() == 1 && observed.n_features() == 1,
            "observed panel must hold one node with one feature", "observed");
    const auto series = observed.series(0, 0);
    return fit_compartmental(std::span<const double>(series), model, population, init, dt, options);
}

}  // namespace epikit
