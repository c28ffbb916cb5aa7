#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "epikit/types.hpp"

namespace epikit {

enum class CompartmentModel { SIR, SIS, SEIR };

std::string_view to_string(CompartmentModel m) noexcept;
CompartmentModel compartment_model_from_string(std::string_view s);

struct CompartmentParams {
    double beta = 0.0;        // transmission rate per unit time
    double gamma = 0.0;       // recovery rate
    double sigma = 0.0;       // incubation rate, SEIR only
    double population = 1.0;  // N

    void validate() const;
};

/// Population counts per compartment sampled at every integration step.
struct CompartmentTrajectory {
    std::vector<Compartment> compartments;  // column order, e.g. {S, I, R}
    std::vector<double> times;
    std::vector<std::vector<double>> counts;  // counts[column][k]

    std::size_t size() const noexcept { return times.size(); }
    /// Column for compartment c; throws if the model has no such compartment.
    const std::vector<double>& series(Compartment c) const;
    /// Σ compartments at sample k.
    double total(std::size_t k) const noexcept;
};

CompartmentTrajectory simulate_sir(const CompartmentParams& params, double s0, double i0, double r0, double horizon,
                                   double dt);
CompartmentTrajectory simulate_sis(const CompartmentParams& params, double s0, double i0, double horizon, double dt);
CompartmentTrajectory simulate_seir(const CompartmentParams& params, double s0, double e0, double i0, double r0,
                                    double horizon, double dt);

enum class FitStatus { Converged, MaxEvaluations, Unidentifiable };
std::string_view to_string(FitStatus s) noexcept;

struct FitResult {
    CompartmentParams params;
    double loss = 0.0;       // MSE at params
    double init_loss = 0.0;  // MSE at the initial guess
    std::size_t evaluations = 0;
    FitStatus status = FitStatus::Converged;
};

struct FitOptions {
    std::size_t max_evaluations = 2000;
    double simplex_tolerance = 1e-9;  // simplex size in log-parameter space
};

/// Least-squares fit of (β, γ[, σ]) to a daily infected series by Nelder-Mead
/// in log-parameter space. observed[k] is I at time k; the simulation starts
/// from I0 = observed[0], R0 = 0 (E0 = 0 for SEIR), S0 = N − I0.
FitResult fit_compartmental(std::span<const double> observed, CompartmentModel model, double population,
                            const CompartmentParams& init, double dt, const FitOptions& options = {});

/// Panel form: the panel must hold a single node with a single feature.
FitResult fit_compartmental(const FeaturePanel& observed, CompartmentModel model, double population,
                            const CompartmentParams& init, double dt, const FitOptions& options = {});

/// Simulated I at integer times 0..n_samples-1 (helper shared by fitting and
/// forecasting).
std::vector<double> sample_infected(CompartmentModel model, const CompartmentParams& params, double i0,
                                    std::size_t n_samples, double dt);

}  // namespace epikit
