#include "ambeq/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

namespace ambeq {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// ISO-8601 calendar date -> comparable (y, m, d) with basic range checks.
std::tuple<int, int, int> parse_date(const std::string& text, long line) {
    int y = 0, m = 0, d = 0;
    char dash1 = 0, dash2 = 0;
    std::istringstream is(text);
    is >> y >> dash1 >> m >> dash2 >> d;
    if (is.fail() || dash1 != '-' || dash2 != '-' || m < 1 || m > 12 || d < 1 || d > 31)
        throw IoError("prices: unparseable date '" + text + "' on line " + std::to_string(line));
    return {y, m, d};
}

} // namespace

PriceSeries load_prices(const std::string& path, double dt) {
    if (!(dt > 0.0))
        throw ParameterError("load_prices: dt must be positive");
    std::ifstream in(path);
    if (!in)
        throw IoError("prices: cannot open '" + path + "'");

    PriceSeries series;
    series.dt = dt;
    std::string line;
    long line_no = 0;
    std::tuple<int, int, int> last_date{-100000, 0, 0};
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string row = trim(line);
        if (row.empty()) continue;
        if (!have_header) {
            std::string lowered = row;
            std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            lowered.erase(std::remove_if(lowered.begin(), lowered.end(),
                                         [](unsigned char c) { return std::isspace(c); }),
                          lowered.end());
            if (lowered != "date,close")
                throw IoError("prices: expected header 'date,close' on line " +
                              std::to_string(line_no));
            have_header = true;
            continue;
        }
        const std::size_t comma = row.find(',');
        if (comma == std::string::npos)
            throw IoError("prices: missing comma on line " + std::to_string(line_no));
        const std::string date_text = trim(row.substr(0, comma));
        const std::string close_text = trim(row.substr(comma + 1));

        const auto date = parse_date(date_text, line_no);
        if (!(last_date < date))
            throw IoError("prices: dates must be strictly increasing (line " +
                          std::to_string(line_no) + ")");
        last_date = date;

        double close = 0.0;
        const auto [ptr, ec] =
            std::from_chars(close_text.data(), close_text.data() + close_text.size(), close);
        if (ec != std::errc{} || ptr != close_text.data() + close_text.size())
            throw IoError("prices: unparseable close '" + close_text + "' on line " +
                          std::to_string(line_no));
        if (!(close > 0.0) || !std::isfinite(close))
            throw IoError("prices: close must be positive (line " + std::to_string(line_no) + ")");
        series.observations.push_back({date_text, close});
    }
    if (!have_header)
        throw IoError("prices: empty file '" + path + "'");
    if (series.observations.empty())
        throw IoError("prices: no data rows in '" + path + "'");
    return series;
}

MleEstimate mle_estimate(const PriceSeries& series) {
    const auto& obs = series.observations;
    if (obs.size() < 30)
        throw ParameterError("mle_estimate: need at least 30 observations, got " +
                             std::to_string(obs.size()));
    const long n = static_cast<long>(obs.size()) - 1;
    double sum = 0.0;
    std::vector<double> returns(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        returns[static_cast<std::size_t>(i)] =
            std::log(obs[static_cast<std::size_t>(i + 1)].close /
                     obs[static_cast<std::size_t>(i)].close);
        sum += returns[static_cast<std::size_t>(i)];
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const double r : returns) ss += (r - mean) * (r - mean);

    MleEstimate est;
    est.dt = series.dt;
    est.n_returns = n;
    const double var = ss / (static_cast<double>(n) * series.dt);
    est.sigma_hat = std::sqrt(var);
    est.mu_hat = mean / series.dt + 0.5 * var;
    return est;
}

GaussianPrior calibrate_prior(const MleEstimate& est, std::optional<double> sigma0_override) {
    GaussianPrior prior;
    prior.beta0 = est.mu_hat;
    if (sigma0_override) {
        prior.sigma0 = *sigma0_override;
    } else {
        // standard error of the drift estimate over the sample span
        prior.sigma0 = est.sigma_hat / std::sqrt(static_cast<double>(est.n_returns) * est.dt);
    }
    return prior;
}

} // namespace ambeq
