#include "epikit/forecast.hpp"

#include <algorithm>
#include <cmath>

#include "epikit/error.hpp"
#include "epikit/mechanistic.hpp"

namespace epikit {

void WindowSpec::validate() const {
    require(lookback >= 1, "lookback must be >= 1", "lookback");
    require(horizon >= 1, "horizon must be >= 1", "horizon");
}

std::size_t window_count(std::size_t n_steps, const WindowSpec& spec) noexcept {
    const std::size_t span = spec.lookback + spec.horizon;
    return n_steps >= span ? n_steps - span + 1 : 0;
}

std::vector<Window> make_windows(const FeaturePanel& panel, const WindowSpec& spec) {
    spec.validate();
    const std::size_t count = window_count(panel.n_steps(), spec);
    if (count == 0)
        fail(ErrorKind::InvalidArgument,
             "series too short: " + std::to_string(panel.n_steps()) + " steps < lookback + horizon", "panel.n_steps");
    std::vector<Window> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s)
        out.push_back({s, panel.slice(s, s + spec.lookback),
                       panel.slice(s + spec.lookback, s + spec.lookback + spec.horizon)});
    return out;
}

// ------------------------------------------------------------------- AR

namespace {

std::vector<double> difference(std::span<const double> x) {
    std::vector<double> out;
    if (x.size() < 2) return out;
    out.reserve(x.size() - 1);
    for (std::size_t i = 1; i < x.size(); ++i) out.push_back(x[i] - x[i - 1]);
    return out;
}

/// Minimum-norm least squares; reports whether the design lost rank.
Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, bool* rank_deficient) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    if (rank_deficient) *rank_deficient = cod.rank() < a.cols();
    return cod.solve(b);
}

}  // namespace

ArModel fit_ar(std::span<const double> series, std::size_t p, std::size_t d) {
    require(p >= 1, "AR order must be >= 1", "p");
    require(d <= 2, "differencing order must be 0, 1 or 2", "d");
    for (double x : series) require(std::isfinite(x), "series must be finite", "series");
    require(series.size() > d, "series too short for differencing", "series");

    std::vector<double> z(series.begin(), series.end());
    for (std::size_t k = 0; k < d; ++k) z = difference(z);
    require(z.size() >= 5 * p, "need at least 5·p observations after differencing", "series");

    const std::size_t rows = z.size() - p;
    Eigen::MatrixXd design(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p + 1));
    Eigen::VectorXd target(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + p;
        design(static_cast<Eigen::Index>(r), 0) = 1.0;
        for (std::size_t j = 1; j <= p; ++j) design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = z[t - j];
        target(static_cast<Eigen::Index>(r)) = z[t];
    }

    ArModel model;
    model.p = p;
    model.d = d;
    const Eigen::VectorXd beta = solve_least_squares(design, target, &model.rank_deficient);
    model.intercept = beta(0);
    model.coefficients.assign(beta.data() + 1, beta.data() + beta.size());
    const std::size_t keep = std::min(series.size(), p + d + 1);
    model.tail.assign(series.end() - static_cast<std::ptrdiff_t>(keep), series.end());
    return model;
}

std::vector<double> ArModel::forecast(std::size_t horizon) const { return forecast_from(tail, horizon); }

std::vector<double> ArModel::forecast_from(std::span<const double> history, std::size_t horizon) const {
    require(history.size() >= p + d, "history shorter than p + d", "history");
    // levels[k] is the k-times differenced history
    std::vector<std::vector<double>> levels{std::vector<double>(history.begin(), history.end())};
    for (std::size_t k = 0; k < d; ++k) levels.push_back(difference(levels.back()));

    std::vector<double> z = levels.back();
    std::vector<double> ahead;
    ahead.reserve(horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
        double next = intercept;
        for (std::size_t j = 1; j <= p; ++j) next += coefficients[j - 1] * z[z.size() - j];
        z.push_back(next);
        ahead.push_back(next);
    }
    for (std::size_t k = d; k-- > 0;) {
        double last = levels[k].back();
        for (double& a : ahead) {
            last += a;
            a = last;
        }
    }
    return ahead;
}

// ------------------------------------------------- trend-seasonal linear

std::vector<double> moving_average_replicated(std::span<const double> x, std::size_t kernel) {
    require(kernel >= 1, "kernel must be >= 1", "period");
    const std::size_t n = x.size();
    const std::size_t front = (kernel - 1) / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < kernel; ++j) {
            const auto idx = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(front);
            s += x[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(n) - 1))];
        }
        out[i] = s / static_cast<double>(kernel);
    }
    return out;
}

namespace {

Eigen::RowVectorXd decomposed_features(std::span<const double> window, std::size_t period) {
    const std::size_t L = window.size();
    const auto trend = moving_average_replicated(window, period);
    Eigen::RowVectorXd f(static_cast<Eigen::Index>(2 * L + 1));
    for (std::size_t i = 0; i < L; ++i) {
        f(static_cast<Eigen::Index>(i)) = trend[i];
        f(static_cast<Eigen::Index>(L + i)) = window[i] - trend[i];
    }
    f(static_cast<Eigen::Index>(2 * L)) = 1.0;
    return f;
}

}  // namespace

LinearDecompModel fit_trend_seasonal(std::span<const double> series, const WindowSpec& spec, std::size_t period) {
    spec.validate();
    require(period >= 2, "period must be >= 2", "period");
    for (double x : series) require(std::isfinite(x), "series must be finite", "series");
    const std::size_t count = window_count(series.size(), spec);
    require(count >= 1, "series too short for one window", "series");

    const std::size_t L = spec.lookback;
    Eigen::MatrixXd design(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(2 * L + 1));
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(spec.horizon));
    for (std::size_t s = 0; s < count; ++s) {
        design.row(static_cast<Eigen::Index>(s)) = decomposed_features(series.subspan(s, L), period);
        for (std::size_t h = 0; h < spec.horizon; ++h)
            targets(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(h)) = series[s + L + h];
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    LinearDecompModel model;
    model.spec = spec;
    model.period = period;
    model.weights = cod.solve(targets).transpose();
    return model;
}

std::vector<double> LinearDecompModel::predict(std::span<const double> lookback_window) const {
    require(lookback_window.size() == spec.lookback, "input window must have lookback steps", "input");
    const Eigen::VectorXd out = weights * decomposed_features(lookback_window, period).transpose();
    return {out.data(), out.data() + out.size()};
}

// ---------------------------------------------------------- mechanistic

std::vector<double> forecast_mechanistic(std::span<const double> lookback_series, std::size_t horizon,
                                         const MechanisticOptions& options) {
    require(horizon >= 1, "horizon must be >= 1", "horizon");
    CompartmentParams init;
    init.beta = options.init_beta;
    init.gamma = options.init_gamma;
    init.population = options.population;
    const FitResult fit =
        fit_compartmental(lookback_series, CompartmentModel::SIR, options.population, init, options.dt);
    const std::size_t L = lookback_series.size();
    const auto path = sample_infected(CompartmentModel::SIR, fit.params, lookback_series[0], L + horizon, options.dt);
    return {path.begin() + static_cast<std::ptrdiff_t>(L), path.end()};
}

// -------------------------------------------------------------- forecasters

namespace {

/// Shared plumbing: channel c = node·F + feature, fitted and predicted
/// independently (in parallel across channels).
class ChannelForecaster : public Forecaster {
public:
    void fit(const FeaturePanel& train, const WindowSpec& spec) override {
        spec.validate();
        spec_ = spec;
        nodes_ = train.n_nodes();
        features_ = train.n_features();
        const std::size_t channels = nodes_ * features_;
        prepare(channels);
        std::vector<std::string> errors(channels);
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(channels); ++ci) {
            const auto c = static_cast<std::size_t>(ci);
            try {
                fit_channel(c, train.series(c / features_, c % features_));
            } catch (const std::exception& e) {
                errors[c] = e.what();
            }
        }
        for (std::size_t c = 0; c < channels; ++c)
            if (!errors[c].empty())
                fail(ErrorKind::InvalidArgument,
                     name() + ": channel (node " + std::to_string(c / features_) + ", feature " +
                         std::to_string(c % features_) + "): " + errors[c],
                     "model");
    }

    FeaturePanel predict(const FeaturePanel& input) const override {
        require(input.n_nodes() == nodes_ && input.n_features() == features_,
                "input shape differs from the training panel", "input");
        require(input.n_steps() == spec_.lookback, "input must span lookback steps", "input");
        const std::size_t channels = nodes_ * features_;
        std::vector<double> values(spec_.horizon * channels);
        std::vector<std::string> errors(channels);
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(channels); ++ci) {
            const auto c = static_cast<std::size_t>(ci);
            try {
                const auto out = predict_channel(c, input.series(c / features_, c % features_));
                for (std::size_t h = 0; h < spec_.horizon; ++h) values[h * channels + c] = out[h];
            } catch (const std::exception& e) {
                errors[c] = e.what();
            }
        }
        for (const auto& e : errors)
            if (!e.empty()) fail(ErrorKind::Runtime, name() + ": " + e, "model");
        return FeaturePanel(spec_.horizon, nodes_, features_, std::move(values));
    }

protected:
    virtual void prepare(std::size_t /*channels*/) {}
    virtual void fit_channel(std::size_t /*channel*/, const std::vector<double>& /*series*/) {}
    virtual std::vector<double> predict_channel(std::size_t channel, const std::vector<double>& window) const = 0;

    WindowSpec spec_;
    std::size_t nodes_ = 0;
    std::size_t features_ = 0;
};

class PersistenceForecaster final : public ChannelForecaster {
public:
    std::string name() const override { return "persistence"; }

protected:
    std::vector<double> predict_channel(std::size_t, const std::vector<double>& w) const override {
        return std::vector<double>(spec_.horizon, w.back());
    }
};

class MeanForecaster final : public ChannelForecaster {
public:
    std::string name() const override { return "mean"; }

protected:
    std::vector<double> predict_channel(std::size_t, const std::vector<double>& w) const override {
        double s = 0.0;
        for (double x : w) s += x;
        return std::vector<double>(spec_.horizon, s / static_cast<double>(w.size()));
    }
};

class ArForecaster final : public ChannelForecaster {
public:
    ArForecaster(std::size_t p, std::size_t d) : p_(p), d_(d) {}
    std::string name() const override { return "ar"; }

protected:
    void prepare(std::size_t channels) override {
        require(spec_.lookback >= p_ + d_, "lookback must be >= p + d for the AR model", "lookback");
        models_.assign(channels, {});
    }
    void fit_channel(std::size_t c, const std::vector<double>& s) override { models_[c] = fit_ar(s, p_, d_); }
    std::vector<double> predict_channel(std::size_t c, const std::vector<double>& w) const override {
        return models_[c].forecast_from(w, spec_.horizon);
    }

private:
    std::size_t p_, d_;
    std::vector<ArModel> models_;
};

class TrendSeasonalForecaster final : public ChannelForecaster {
public:
    explicit TrendSeasonalForecaster(std::size_t period) : period_(period) {}
    std::string name() const override { return "trend_seasonal"; }

protected:
    void prepare(std::size_t channels) override { models_.assign(channels, {}); }
    void fit_channel(std::size_t c, const std::vector<double>& s) override {
        models_[c] = fit_trend_seasonal(s, spec_, period_);
    }
    std::vector<double> predict_channel(std::size_t c, const std::vector<double>& w) const override {
        return models_[c].predict(w);
    }

private:
    std::size_t period_;
    std::vector<LinearDecompModel> models_;
};

class MechanisticForecaster final : public ChannelForecaster {
public:
    explicit MechanisticForecaster(MechanisticOptions opts) : opts_(opts) {}
    std::string name() const override { return "mechanistic"; }

protected:
    std::vector<double> predict_channel(std::size_t, const std::vector<double>& w) const override {
        return forecast_mechanistic(w, spec_.horizon, opts_);
    }

private:
    MechanisticOptions opts_;
};

}  // namespace

const std::vector<std::string>& forecaster_names() {
    static const std::vector<std::string> names{"ar", "mean", "mechanistic", "persistence", "trend_seasonal"};
    return names;
}

std::unique_ptr<Forecaster> make_forecaster(const std::string& name, const ForecasterOptions& options) {
    if (name == "persistence") return std::make_unique<PersistenceForecaster>();
    if (name == "mean") return std::make_unique<MeanForecaster>();
    if (name == "ar") return std::make_unique<ArForecaster>(options.ar_order, options.differencing);
    if (name == "trend_seasonal") return std::make_unique<TrendSeasonalForecaster>(options.period);
    if (name == "mechanistic") return std::make_unique<MechanisticForecaster>(options.mechanistic);
    std::string known;
    for (const auto& n : forecaster_names()) known += (known.empty() ? "" : ", ") + n;
    fail(ErrorKind::InvalidArgument, "unknown model '" + name + "'; available models: " + known, "model");
}

// ------------------------------------------------------------- evaluation

MetricSet compute_metrics(std::span<const double> predicted, std::span<const double> actual) {
    require(predicted.size() == actual.size(), "prediction and target sizes differ", "predicted");
    require(!actual.empty(), "no points to score", "actual");
    MetricSet m;
    m.n_points = actual.size();
    double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
    std::size_t pct_n = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double e = predicted[i] - actual[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        if (actual[i] != 0.0) {
            pct_sum += std::abs(e) / std::abs(actual[i]);
            ++pct_n;
        } else {
            ++m.mape_excluded;
        }
    }
    const auto n = static_cast<double>(actual.size());
    m.mae = abs_sum / n;
    m.rmse = std::sqrt(sq_sum / n);
    if (pct_n > 0) m.mape = pct_sum / static_cast<double>(pct_n);
    return m;
}

ForecastReport evaluate_windows(const Forecaster& model, const FeaturePanel& panel, const WindowSpec& spec) {
    const auto windows = make_windows(panel, spec);
    const std::size_t row = panel.n_nodes() * panel.n_features();
    std::vector<double> all_pred, all_true;
    std::vector<std::vector<double>> h_pred(spec.horizon), h_true(spec.horizon);
    for (const Window& w : windows) {
        const FeaturePanel pred = model.predict(w.input);
        for (std::size_t h = 0; h < spec.horizon; ++h) {
            for (std::size_t c = 0; c < row; ++c) {
                const double yp = pred.values()[h * row + c];
                const double yt = w.target.values()[h * row + c];
                all_pred.push_back(yp);
                all_true.push_back(yt);
                h_pred[h].push_back(yp);
                h_true[h].push_back(yt);
            }
        }
    }
    ForecastReport report;
    report.n_windows = windows.size();
    report.overall = compute_metrics(all_pred, all_true);
    for (std::size_t h = 0; h < spec.horizon; ++h) report.per_horizon.push_back(compute_metrics(h_pred[h], h_true[h]));
    return report;
}

ForecastReport evaluate_forecaster(Forecaster& model, const EpiDataset& ds, const WindowSpec& spec) {
    spec.validate();
    const DatasetSplit parts = split_dataset(ds);
    if (window_count(parts.test.panel().n_steps(), spec) == 0)
        fail(ErrorKind::InvalidArgument,
             "no valid windows: test segment has " + std::to_string(parts.test.panel().n_steps()) +
                 " steps, lookback + horizon = " + std::to_string(spec.lookback + spec.horizon),
             "split");
    model.fit(parts.train.panel(), spec);
    return evaluate_windows(model, parts.test.panel(), spec);
}

}  // namespace epikit
