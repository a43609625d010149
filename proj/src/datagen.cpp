#include "weca/datagen.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "weca/error.hpp"
#include "weca/rng.hpp"

namespace weca {

namespace {

bool parse_uint(std::string_view s, unsigned& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

SeriesSet slice(const SeriesSet& set, const std::vector<std::pair<std::size_t, std::size_t>>& ranges) {
    SeriesSet out;
    out.channels = set.channels;
    for (std::size_t s = 0; s < set.series.size(); ++s) {
        const auto& src = set.series[s];
        const auto [begin, end] = ranges[s];
        Series part;
        part.id = src.id;
        part.start = src.start + std::chrono::days{static_cast<int>(begin)};
        part.values.assign(src.values.begin() + static_cast<std::ptrdiff_t>(begin * set.channels),
                           src.values.begin() + static_cast<std::ptrdiff_t>(end * set.channels));
        out.series.push_back(std::move(part));
    }
    return out;
}

}  // namespace

Date parse_iso_date(const std::string& text) {
    unsigned y = 0, m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
        !parse_uint(std::string_view(text).substr(0, 4), y) ||
        !parse_uint(std::string_view(text).substr(5, 2), m) ||
        !parse_uint(std::string_view(text).substr(8, 2), d)) {
        throw DataError("invalid ISO-8601 date '" + text + "'");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(y)}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw DataError("invalid calendar date '" + text + "'");
    return Date{ymd};
}

std::string format_iso_date(Date date) {
    const std::chrono::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::size_t SeriesSet::total_samples() const {
    std::size_t n = 0;
    for (std::size_t s = 0; s < series.size(); ++s) n += length(s);
    return n;
}

std::size_t SeriesSet::index_of(const std::string& id) const {
    for (std::size_t s = 0; s < series.size(); ++s) {
        if (series[s].id == id) return s;
    }
    throw DataError("unknown series id '" + id + "'");
}

SeriesSet generate_synthetic(const SyntheticConfig& config) {
    if (config.n_series < 1) throw DataError("generate_synthetic: n_series must be >= 1");
    const std::size_t min_length = 2 * config.window.span();
    if (config.length < min_length) {
        throw DataError("generate_synthetic: length " + std::to_string(config.length) +
                        " is shorter than 2(T+H) = " + std::to_string(min_length));
    }
    // Mon..Sun withdrawal shape: busy Friday, quiet Sunday.
    constexpr std::array<double, 7> kWeekShape{0.05, -0.05, 0.0, 0.15, 0.55, 0.1, -0.8};

    Rng rng(derive_seed(config.seed, {0x5e7}));
    std::uniform_real_distribution<double> level_dist(config.level_min, config.level_max);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> phase_dist(0, 6);

    const Date start = parse_iso_date(config.start_date);
    SeriesSet set;
    set.channels = 1;
    for (std::size_t s = 0; s < config.n_series; ++s) {
        const double level = level_dist(rng);
        const double slope = config.trend_scale * level * unit(rng) / static_cast<double>(config.length);
        std::array<double, 7> profile{};
        for (std::size_t d = 0; d < 7; ++d) profile[d] = kWeekShape[d] + 0.1 * unit(rng);
        const double centre = std::accumulate(profile.begin(), profile.end(), 0.0) / 7.0;
        for (double& p : profile) p = (p - centre) * config.weekly_amplitude * level;
        const int phase = phase_dist(rng);

        Series series;
        char id[32];
        std::snprintf(id, sizeof(id), "atm_%03zu", s);
        series.id = id;
        series.start = start;
        series.values.resize(config.length);
        for (std::size_t t = 0; t < config.length; ++t) {
            const double noise = config.noise_scale > 0.0 ? config.noise_scale * level * unit(rng) : 0.0;
            const double v = level + profile[(t + static_cast<std::size_t>(phase)) % 7] +
                             slope * static_cast<double>(t) + noise;
            series.values[t] = std::max(v, 0.0);
        }
        set.series.push_back(std::move(series));
    }
    return set;
}

SeriesSet read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("csv: empty input, expected header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "series_id,date,value") {
        throw DataError("csv: header must be 'series_id,date,value', got '" + line + "'");
    }

    SeriesSet set;
    std::map<std::string, std::size_t> slot;
    std::vector<Date> last_date;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        const std::string where = "csv row " + std::to_string(row);
        if (fields.size() != 3 || fields[0].empty()) {
            throw DataError(where + ": malformed row '" + line + "'");
        }
        const std::string id(fields[0]);
        Date date;
        try {
            date = parse_iso_date(std::string(fields[1]));
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        double value = 0.0;
        const auto vf = fields[2];
        auto [ptr, ec] = std::from_chars(vf.data(), vf.data() + vf.size(), value);
        if (ec != std::errc{} || ptr != vf.data() + vf.size() || !std::isfinite(value)) {
            throw DataError(where + ": non-numeric value '" + std::string(vf) + "'");
        }

        auto it = slot.find(id);
        if (it == slot.end()) {
            it = slot.emplace(id, set.series.size()).first;
            set.series.push_back(Series{id, {value}, date});
            last_date.push_back(date);
            continue;
        }
        const std::size_t s = it->second;
        const Date prev = last_date[s];
        // Dates seen so far for this id are exactly [start, prev].
        if (date <= prev && date >= set.series[s].start) {
            throw DataError(where + ": duplicate (series_id, date) = (" + id + ", " + format_iso_date(date) + ")");
        }
        if (date < prev) {
            throw DataError(where + ": non-monotone dates for '" + id + "': " + format_iso_date(date) +
                            " after " + format_iso_date(prev));
        }
        if (date != prev + std::chrono::days{1}) {
            throw DataError(where + ": missing dates for '" + id + "' between " + format_iso_date(prev) +
                            " and " + format_iso_date(date));
        }
        set.series[s].values.push_back(value);
        last_date[s] = date;
    }
    return set;
}

SeriesSet load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return read_csv(in);
}

void write_csv(const SeriesSet& set, std::ostream& out) {
    if (set.channels != 1) throw DataError("csv export supports univariate series only");
    out << "series_id,date,value\n";
    for (const auto& s : set.series) {
        for (std::size_t t = 0; t < s.values.size(); ++t) {
            out << s.id << ',' << format_iso_date(s.start + std::chrono::days{static_cast<int>(t)}) << ','
                << format_double(s.values[t]) << '\n';
        }
    }
}

void write_csv(const SeriesSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    write_csv(set, out);
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Partitions split(const SeriesSet& set, const SplitSpec& spec, std::size_t min_length) {
    const double total = spec.train_frac + spec.val_frac + spec.test_frac;
    if (spec.train_frac < 0 || spec.val_frac < 0 || spec.test_frac < 0 || std::fabs(total - 1.0) > 1e-9) {
        throw DataError("split fractions must be non-negative and sum to 1");
    }
    std::vector<std::pair<std::size_t, std::size_t>> tr, va, te;
    for (std::size_t s = 0; s < set.series.size(); ++s) {
        const std::size_t len = set.length(s);
        const auto part = [len](double frac) {
            return static_cast<std::size_t>(std::floor(static_cast<double>(len) * frac + 1e-9));
        };
        // Cumulative floors from the end keep train within one sample of its share.
        const std::size_t n_test = part(spec.test_frac);
        const std::size_t n_val = part(spec.val_frac + spec.test_frac) - n_test;
        const std::size_t n_train = len - n_val - n_test;
        for (auto [name, n] : {std::pair{"train", n_train}, {"val", n_val}, {"test", n_test}}) {
            if (n < min_length) {
                throw DataError("split: " + std::string(name) + " partition of '" + set.series[s].id + "' has " +
                                std::to_string(n) + " samples, need at least " + std::to_string(min_length));
            }
        }
        tr.emplace_back(0, n_train);
        va.emplace_back(n_train, n_train + n_val);
        te.emplace_back(n_train + n_val, len);
    }
    return Partitions{slice(set, tr), slice(set, va), slice(set, te)};
}

WindowIndex enumerate_windows(const SeriesSet& set, const WindowSpec& window) {
    if (window.input < 1 || window.horizon < 1) throw DataError("window sizes T and H must be >= 1");
    WindowIndex index;
    for (std::size_t s = 0; s < set.series.size(); ++s) {
        const std::size_t len = set.length(s);
        if (len < window.span()) {
            ++index.skipped_series;
            continue;
        }
        for (std::size_t origin = window.input; origin + window.horizon <= len; ++origin) {
            index.windows.push_back({s, origin});
        }
    }
    return index;
}

WindowBatch gather_batch(const SeriesSet& set, const WindowSpec& window, const std::vector<WindowRef>& refs) {
    const std::size_t c = set.channels;
    WindowBatch batch;
    batch.batch = refs.size();
    batch.inputs.reserve(refs.size() * window.input * c);
    batch.targets.reserve(refs.size() * window.horizon * c);
    for (const auto& ref : refs) {
        const auto& values = set.series[ref.series].values;
        const auto first = values.begin() + static_cast<std::ptrdiff_t>((ref.origin - window.input) * c);
        const auto mid = values.begin() + static_cast<std::ptrdiff_t>(ref.origin * c);
        const auto last = values.begin() + static_cast<std::ptrdiff_t>((ref.origin + window.horizon) * c);
        batch.inputs.insert(batch.inputs.end(), first, mid);
        batch.targets.insert(batch.targets.end(), mid, last);
        batch.series_ids.push_back(set.series[ref.series].id);
        batch.refs.push_back(ref);
    }
    return batch;
}

std::vector<WindowRef> shuffled_windows(const WindowIndex& index, std::uint64_t seed, std::uint64_t epoch) {
    auto order = index.windows;
    Rng rng(derive_seed(seed, {0xba7c4, epoch}));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

BatchStream make_batches(const SeriesSet& set, const WindowSpec& window, std::size_t batch_size,
                         std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size < 1) throw DataError("batch_size must be >= 1");
    const auto index = enumerate_windows(set, window);
    const auto order = shuffled_windows(index, seed, epoch);
    BatchStream stream;
    stream.window_count = order.size();
    stream.skipped_series = index.skipped_series;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
        const std::size_t end = std::min(order.size(), begin + batch_size);
        std::vector<WindowRef> refs(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
        stream.batches.push_back(gather_batch(set, window, refs));
    }
    return stream;
}

NormStats compute_stats(const SeriesSet& train) {
    NormStats stats;
    stats.channels = train.channels;
    const std::size_t c = train.channels;
    for (std::size_t s = 0; s < train.series.size(); ++s) {
        const std::size_t len = train.length(s);
        if (len == 0) throw DataError("normalize: empty train partition for '" + train.series[s].id + "'");
        stats.ids.push_back(train.series[s].id);
        for (std::size_t ch = 0; ch < c; ++ch) {
            double m = 0.0;
            for (std::size_t t = 0; t < len; ++t) m += train.series[s].values[t * c + ch];
            m /= static_cast<double>(len);
            double var = 0.0;
            for (std::size_t t = 0; t < len; ++t) {
                const double d = train.series[s].values[t * c + ch] - m;
                var += d * d;
            }
            var /= static_cast<double>(len);
            stats.mean.push_back(m);
            stats.std.push_back(std::max(std::sqrt(var), kStdFloor));
        }
    }
    if (stats.ids.empty()) throw DataError("normalize: empty train partition");
    return stats;
}

namespace {

template <typename F>
SeriesSet map_values(const NormStats& stats, const SeriesSet& set, F&& f) {
    if (set.series.size() != stats.ids.size() || set.channels != stats.channels) {
        throw DataError("normalization stats do not match the series set");
    }
    SeriesSet out = set;
    const std::size_t c = set.channels;
    for (std::size_t s = 0; s < out.series.size(); ++s) {
        if (out.series[s].id != stats.ids[s]) {
            throw DataError("normalization stats are for '" + stats.ids[s] + "', not '" + out.series[s].id + "'");
        }
        auto& values = out.series[s].values;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const std::size_t k = s * c + i % c;
            values[i] = f(values[i], stats.mean[k], stats.std[k]);
        }
    }
    return out;
}

}  // namespace

SeriesSet normalize(const NormStats& stats, const SeriesSet& set) {
    return map_values(stats, set, [](double v, double m, double sd) { return (v - m) / sd; });
}

SeriesSet denormalize(const NormStats& stats, const SeriesSet& set) {
    return map_values(stats, set, [](double v, double m, double sd) { return v * sd + m; });
}

double denormalize_value(const NormStats& stats, std::size_t series, std::size_t channel, double value) {
    const std::size_t k = series * stats.channels + channel;
    return value * stats.std[k] + stats.mean[k];
}

}  // namespace weca
