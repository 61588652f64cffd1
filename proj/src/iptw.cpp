#include "ctmsm/iptw.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctmsm {

namespace {

double stable_logistic(double eta) {
    if (eta >= 0.0) {
        double e = std::exp(-eta);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(eta);
    return e / (1.0 + e);
}

// design matrix: intercept, interval dummies 2..K minus dropped, covariates
Eigen::MatrixXd build_design(const LogisticFit& fit, const PersonPeriodTable& table) {
    std::vector<int> dummy_for(static_cast<std::size_t>(table.K + 1), -1);
    int col = 1;
    for (int k = 2; k <= table.K; ++k) {
        bool dropped = false;
        for (int d : fit.dropped_intervals) dropped |= (d == k);
        if (!dropped) dummy_for[static_cast<std::size_t>(k)] = col++;
    }
    const int q = fit.with_covariates ? static_cast<int>(table.covariates.cols()) : 0;
    const auto rows = static_cast<Eigen::Index>(table.rows());
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(rows, col + q);
    for (Eigen::Index r = 0; r < rows; ++r) {
        design(r, 0) = 1.0;
        int dummy = dummy_for[static_cast<std::size_t>(table.interval[static_cast<std::size_t>(r)])];
        if (dummy >= 0) design(r, dummy) = 1.0;
        for (int j = 0; j < q; ++j) design(r, col + j) = table.covariates(r, j);
    }
    return design;
}

}  // namespace

PersonPeriodTable discretize(const EventHistory& history, int K, const DesignSpec& covariates) {
    if (K < 1) throw std::invalid_argument("discretize: K must be >= 1");
    PersonPeriodTable table;
    table.K = K;
    table.horizon = history.horizon();
    table.n_subjects = history.n();
    table.covariate_names = covariates.labels();
    const double width = history.horizon() / K;
    const int q = covariates.size();

    std::vector<double> x(static_cast<std::size_t>(q));
    std::vector<std::vector<double>> cov_rows;
    for (int i = 0; i < history.n(); ++i) {
        const double exit = history.risk_exit(i, EventKind::Treatment);
        const double t_treat = history.first_time(i, EventKind::Treatment);
        for (int k = 1; k <= K; ++k) {
            const double start = (k - 1) * width;
            if (!(exit > start)) break;  // an event in an earlier interval ends the rows
            table.subject.push_back(i);
            table.interval.push_back(k);
            const double end = k * width;
            table.treated.push_back(t_treat > start && t_treat <= end ? 1 : 0);
            table.at_risk.push_back(1);
            // time-updated covariates: the latest value realized within the
            // interval, i.e. the left limit at the interval end
            design_row(history, covariates, i, end, x.data());
            cov_rows.emplace_back(x.begin(), x.end());
        }
    }
    table.covariates.resize(static_cast<Eigen::Index>(cov_rows.size()), q);
    for (std::size_t r = 0; r < cov_rows.size(); ++r)
        for (int j = 0; j < q; ++j)
            table.covariates(static_cast<Eigen::Index>(r), j) = cov_rows[r][static_cast<std::size_t>(j)];
    return table;
}

LogisticFit fit_pooled_logistic(const PersonPeriodTable& table, bool with_covariates) {
    LogisticFit fit;
    fit.with_covariates = with_covariates;

    // saturated time dummies are unidentifiable in intervals without
    // treatment events to anchor them
    std::vector<long> events(static_cast<std::size_t>(table.K + 1), 0);
    for (std::size_t r = 0; r < table.rows(); ++r)
        events[static_cast<std::size_t>(table.interval[r])] += table.treated[r];
    for (int k = 2; k <= table.K; ++k)
        if (events[static_cast<std::size_t>(k)] == 0) fit.dropped_intervals.push_back(k);

    fit.column_names.push_back("1");
    for (int k = 2; k <= table.K; ++k) {
        bool dropped = false;
        for (int d : fit.dropped_intervals) dropped |= (d == k);
        if (!dropped) fit.column_names.push_back("interval" + std::to_string(k));
    }
    if (with_covariates)
        for (const auto& name : table.covariate_names) fit.column_names.push_back(name);

    const Eigen::MatrixXd design = build_design(fit, table);
    const auto rows = design.rows();
    const auto p = design.cols();
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) y(r) = table.treated[static_cast<std::size_t>(r)];

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (int it = 1; it <= kIrlsMaxIterations; ++it) {
        fit.iterations = it;
        Eigen::VectorXd eta = design * beta;
        Eigen::VectorXd mu(rows), sw(rows), z(rows);
        for (Eigen::Index r = 0; r < rows; ++r) {
            double m = stable_logistic(eta(r));
            m = std::min(std::max(m, 1e-12), 1.0 - 1e-12);
            double w = m * (1.0 - m);
            mu(r) = m;
            sw(r) = std::sqrt(w);
            z(r) = eta(r) + (y(r) - m) / w;
        }
        // weighted least squares step; rank-deficient columns pinned to zero
        Eigen::MatrixXd wx = sw.asDiagonal() * design;
        Eigen::VectorXd wz = sw.cwiseProduct(z);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wx);
        qr.setThreshold(1e-10);
        beta = qr.solve(wz);

        Eigen::VectorXd eta2 = design * beta;
        for (Eigen::Index r = 0; r < rows; ++r) mu(r) = stable_logistic(eta2(r));
        Eigen::VectorXd grad = design.transpose() * (y - mu);
        if (grad.lpNorm<Eigen::Infinity>() <= kIrlsGradientTol) {
            fit.converged = true;
            break;
        }
    }
    if (beta.lpNorm<Eigen::Infinity>() > 30.0) fit.converged = false;  // separation

    fit.coef = beta;
    Eigen::VectorXd eta = design * beta;
    fit.loglik = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        double m = stable_logistic(eta(r));
        m = std::min(std::max(m, 1e-15), 1.0 - 1e-15);
        fit.loglik += y(r) == 1.0 ? std::log(m) : std::log(1.0 - m);
    }
    return fit;
}

Eigen::VectorXd predict(const LogisticFit& fit, const PersonPeriodTable& table) {
    const Eigen::MatrixXd design = build_design(fit, table);
    if (design.cols() != fit.coef.size())
        throw std::invalid_argument("predict: fit does not match table geometry");
    Eigen::VectorXd eta = design * fit.coef;
    Eigen::VectorXd out(eta.size());
    for (Eigen::Index r = 0; r < eta.size(); ++r) out(r) = stable_logistic(eta(r));
    return out;
}

WeightSet stabilized_iptw(const LogisticFit& numerator_fit, const LogisticFit& denominator_fit,
                          const PersonPeriodTable& table) {
    const Eigen::VectorXd p_num = predict(numerator_fit, table);
    const Eigen::VectorXd p_den = predict(denominator_fit, table);

    WeightSet ws;
    ws.provenance = WeightProvenance::Iptw;
    ws.paths.assign(static_cast<std::size_t>(table.n_subjects), StepPath(1.0));
    const double width = table.horizon / table.K;

    // rows are emitted grouped by subject with ascending intervals
    std::size_t r = 0;
    while (r < table.rows()) {
        const int i = table.subject[r];
        double w = 1.0;
        bool first = true;
        StepPath path(1.0);
        for (; r < table.rows() && table.subject[r] == i; ++r) {
            const int a = table.treated[r];
            const double pn = p_num(static_cast<Eigen::Index>(r));
            const double pd = p_den(static_cast<Eigen::Index>(r));
            if (pd <= 0.0 || pd >= 1.0)
                throw std::domain_error("stabilized_iptw: denominator probability 0 or 1 (positivity)");
            const double num = a ? pn : 1.0 - pn;
            const double den = a ? pd : 1.0 - pd;
            w *= num / den;
            const int k = table.interval[r];
            if (first && k == 1) {
                path = StepPath(w);  // weight of interval 1 applies from time 0
            } else {
                path.append((k - 1) * width, w);
            }
            first = false;
        }
        ws.paths[static_cast<std::size_t>(i)] = std::move(path);
    }
    return ws;
}

}  // namespace ctmsm
