#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epikit/types.hpp"

namespace epikit {

struct WindowSpec {
    std::size_t lookback = 12;
    std::size_t horizon = 3;

    void validate() const;
};

struct Window {
    std::size_t start = 0;  // first input step
    FeaturePanel input;     // [lookback][node][feature]
    FeaturePanel target;    // [horizon][node][feature]
};

/// Every window start in [0, T − lookback − horizon].
std::vector<Window> make_windows(const FeaturePanel& panel, const WindowSpec& spec);
std::size_t window_count(std::size_t n_steps, const WindowSpec& spec) noexcept;

// ---------------------------------------------------------------- AR(p, d)

/// ARIMA(p, d, 0): AR(p) with intercept fitted by OLS on the d-times
/// differenced series.
struct ArModel {
    std::size_t p = 1;
    std::size_t d = 0;
    double intercept = 0.0;
    std::vector<double> coefficients;  // φ_1..φ_p
    bool rank_deficient = false;       // OLS fell back to the minimum-norm solution
    std::vector<double> tail;          // last observations of the training series

    /// Continues the training series by `horizon` steps.
    std::vector<double> forecast(std::size_t horizon) const;
    /// Continues an arbitrary history (length ≥ p + d) by `horizon` steps.
    std::vector<double> forecast_from(std::span<const double> history, std::size_t horizon) const;
};

ArModel fit_ar(std::span<const double> series, std::size_t p, std::size_t d);

// ------------------------------------------------- trend-seasonal linear

/// Moving average with edge replication, output length = input length.
std::vector<double> moving_average_replicated(std::span<const double> x, std::size_t kernel);

/// Decomposition-plus-linear forecaster: each lookback window is split into a
/// moving-average trend and a remainder, and one linear map per component
/// (plus a bias) sends lookback to horizon. The maps are fitted jointly by
/// minimum-norm least squares over all training windows.
struct LinearDecompModel {
    WindowSpec spec;
    std::size_t period = 2;
    Eigen::MatrixXd weights;  // horizon × (2·lookback + 1)

    std::vector<double> predict(std::span<const double> lookback_window) const;
};

LinearDecompModel fit_trend_seasonal(std::span<const double> series, const WindowSpec& spec, std::size_t period);

// ---------------------------------------------------------- mechanistic

struct MechanisticOptions {
    double population = 1000.0;
    double dt = 0.1;
    double init_beta = 0.3;
    double init_gamma = 0.1;
};

/// Fits SIR on the lookback series, then rolls the ODE forward `horizon` steps.
std::vector<double> forecast_mechanistic(std::span<const double> lookback_series, std::size_t horizon,
                                         const MechanisticOptions& options = {});

// -------------------------------------------------------------- forecasters

/// Per-channel forecaster: fit on a training panel, predict [horizon][node][feature]
/// from a [lookback][node][feature] input.
class Forecaster {
public:
    virtual ~Forecaster() = default;
    virtual std::string name() const = 0;
    virtual void fit(const FeaturePanel& train, const WindowSpec& spec) = 0;
    virtual FeaturePanel predict(const FeaturePanel& input) const = 0;
};

struct ForecasterOptions {
    std::size_t ar_order = 2;
    std::size_t differencing = 0;
    std::size_t period = 7;
    MechanisticOptions mechanistic;
};

const std::vector<std::string>& forecaster_names();
/// Throws Error(InvalidArgument, field "model") listing known names.
std::unique_ptr<Forecaster> make_forecaster(const std::string& name, const ForecasterOptions& options = {});

// ------------------------------------------------------------- evaluation

struct MetricSet {
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> mape;     // empty when every target is zero
    std::size_t mape_excluded = 0;  // zero-valued targets left out of MAPE
    std::size_t n_points = 0;
};

MetricSet compute_metrics(std::span<const double> predicted, std::span<const double> actual);

struct ForecastReport {
    MetricSet overall;
    std::vector<MetricSet> per_horizon;  // index h = h+1 steps ahead
    std::size_t n_windows = 0;
};

/// Scores a fitted forecaster on every window of `panel`.
ForecastReport evaluate_windows(const Forecaster& model, const FeaturePanel& panel, const WindowSpec& spec);

/// Splits chronologically, fits on the training segment and evaluates on the
/// test segment.
ForecastReport evaluate_forecaster(Forecaster& model, const EpiDataset& ds, const WindowSpec& spec);

}  // namespace epikit
