#include "lcsdive/common.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace lcsdive {

Index sample_weighted(Rng& rng, const std::vector<double>& weights)
{
    double total = 0.0;
    for (double w : weights) total += w;
    const auto n = static_cast<std::int64_t>(weights.size());
    if (!(total > 0.0)) return uniform_int(rng, 0, n - 1);
    double target = uniform01(rng) * total;
    for (std::int64_t i = 0; i < n; ++i) {
        target -= weights[static_cast<std::size_t>(i)];
        if (target < 0.0) return i;
    }
    // rounding left target marginally above zero: last positive weight
    for (std::int64_t i = n - 1; i >= 0; --i)
        if (weights[static_cast<std::size_t>(i)] > 0.0) return i;
    return n - 1;
}

void parallel_for(Index n, int workers, const std::function<void(Index)>& fn)
{
    if (workers <= 1 || n <= 1) {
        for (Index i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (Index i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const auto count = std::min<Index>(workers, n);
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(count));
    for (Index t = 0; t < count; ++t) pool.emplace_back(body);
    pool.clear();
    if (error) std::rethrow_exception(error);
}

std::string format_double(double v)
{
    if (std::isnan(v)) return "NA";
    if (v == 0.0) return "0";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

std::vector<std::string> split_csv_line(std::string_view line)
{
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (ch != '\r') {
            field += ch;
        }
    }
    out.push_back(std::move(field));
    return out;
}

std::string csv_escape(std::string_view field)
{
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

} // namespace lcsdive
