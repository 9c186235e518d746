#include "bsmf/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "bsmf/errors.hpp"

namespace bsmf {

namespace {

// xoshiro256++ with SplitMix64 seeding; self-contained so event sequences are
// reproducible across standard-library implementations.
struct Rng {
    std::array<std::uint64_t, 4> s{};

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : s) word = splitmix64(x);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t next() {
        std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
        std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double expo(double rate) {
        double u;
        do {
            u = u01();
        } while (u <= 0.0);
        return -std::log(u) / rate;
    }

    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }
};

double retry_closed_form(double x, double t_now) {
    double denom = 1.0 - x;
    if (denom <= 0.0)
        throw Error(ErrorCode::RetrySeriesDivergence,
                    "retry series diverged during simulation", t_now);
    return x / (denom * denom);
}

// Exact occupancy-time integrals per (level, environment) cell; cells are
// flushed lazily when their count changes.
struct OccupancyIntegral {
    Eigen::MatrixXd acc;
    Eigen::MatrixXd last;

    void init(int levels, int m) {
        acc = Eigen::MatrixXd::Zero(levels, m);
        last = Eigen::MatrixXd::Zero(levels, m);
    }
    void flush_cell(int o, int j, double t, double count) {
        acc(o, j) += count * (t - last(o, j));
        last(o, j) = t;
    }
    void flush_all(double t, const Eigen::MatrixXi& cnt) {
        for (int o = 0; o < acc.rows(); ++o)
            for (int j = 0; j < acc.cols(); ++j) flush_cell(o, j, t, cnt(o, j));
    }
};

struct Engine {
    const ModelParams& p;
    const SimOptions& opts;
    Rng rng;

    int levels, m, K, C, L, floor_lv, ceil_lv;
    std::int64_t N;
    double t = 0.0;
    std::int64_t events = 0;
    std::int64_t clamps = 0;

    std::vector<int> level;  // per station
    std::vector<int> senv;   // per station (paper-rates)
    int genv = 0;            // shared state (physical)
    Eigen::MatrixXi cnt;     // station counts, levels x m
    std::int64_t in_transit = 0;
    std::int64_t parked = 0;

    // paper-rates bookkeeping, all per environment row
    std::vector<std::vector<int>> bucket; // cell -> station ids
    std::vector<int> bucket_pos;          // station -> position in its bucket
    std::vector<std::int64_t> n_row, n_pos, n_mid; // stations; with k>=1; with -(L-1)<=k<=0
    std::vector<double> s_pos;                     // sum of k*count over k>=1
    std::vector<double> up_row;                    // cached total up rate of the row
    std::vector<char> row_dirty;

    OccupancyIntegral occ;
    Eigen::MatrixXd acc_at_burn;
    bool burn_recorded = false;
    double burn_time = 0.0;
    bool store_snapshots = true; // chaos runs sample on a grid without storing

    std::vector<double> station_acc, station_last;

    SimResult result;

    Engine(const ModelParams& params, const SimOptions& options)
        : p(params), opts(options), rng(options.seed) {
        p.validate();
        if (opts.N < 1) throw Error(ErrorCode::InvalidArgument, "need N >= 1");
        if (opts.horizon <= 0.0) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
        N = opts.N;
        K = p.K;
        C = p.C;
        L = p.L;
        floor_lv = p.floor_level();
        ceil_lv = p.ceiling_level();
        levels = p.num_levels();
        m = p.env.m;

        int init_level = opts.initial_level == SimOptions::kDefaultInitialLevel
                             ? C
                             : opts.initial_level;
        if (init_level < floor_lv || init_level > ceil_lv)
            throw Error(ErrorCode::InvalidArgument, "initial level out of range");
        if (opts.mode == SimMode::Physical && init_level > C)
            throw Error(ErrorCode::InvalidArgument,
                        "physical mode cannot start with more bikes than C per station");

        level.assign(N, init_level);
        cnt = Eigen::MatrixXi::Zero(levels, m);
        occ.init(levels, m);
        burn_time = opts.burn_in_frac * opts.horizon;

        if (opts.mode == SimMode::Physical) {
            // shared environment state drawn from the stationary vector
            double u = rng.u01();
            double cum = 0.0;
            genv = m - 1;
            for (int j = 0; j < m; ++j) {
                cum += p.env.theta[j];
                if (u < cum) {
                    genv = j;
                    break;
                }
            }
            cnt(offset(init_level), genv) = static_cast<int>(N);
            parked = static_cast<std::int64_t>(std::max(init_level, 0)) * N;
            in_transit = static_cast<std::int64_t>(C) * N - parked;
        } else {
            // deterministic largest-remainder split of stations across
            // environment states, proportional to theta
            senv.assign(N, 0);
            std::vector<std::int64_t> alloc(m, 0);
            std::vector<std::pair<double, int>> rema(m);
            std::int64_t assigned = 0;
            for (int j = 0; j < m; ++j) {
                double exact = p.env.theta[j] * static_cast<double>(N);
                alloc[j] = static_cast<std::int64_t>(std::floor(exact));
                assigned += alloc[j];
                rema[j] = {exact - std::floor(exact), j};
            }
            std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            for (std::int64_t r = 0; r < static_cast<std::int64_t>(N) - assigned; ++r)
                ++alloc[rema[static_cast<std::size_t>(r) % m].second];
            std::int64_t station = 0;
            for (int j = 0; j < m; ++j)
                for (std::int64_t c = 0; c < alloc[j]; ++c) senv[station++] = j;

            bucket.assign(static_cast<std::size_t>(levels) * m, {});
            bucket_pos.assign(N, -1);
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(N); ++i) {
                int cell = cell_of(offset(level[i]), senv[i]);
                bucket_pos[i] = static_cast<int>(bucket[cell].size());
                bucket[cell].push_back(static_cast<int>(i));
                ++cnt(offset(level[i]), senv[i]);
            }
            n_row.assign(m, 0);
            n_pos.assign(m, 0);
            n_mid.assign(m, 0);
            s_pos.assign(m, 0.0);
            up_row.assign(m, 0.0);
            row_dirty.assign(m, 1);
            for (int j = 0; j < m; ++j) {
                for (int k = floor_lv; k <= ceil_lv; ++k) {
                    std::int64_t c = cnt(offset(k), j);
                    if (c == 0) continue;
                    n_row[j] += c;
                    if (k >= 1) {
                        n_pos[j] += c;
                        s_pos[j] += static_cast<double>(k) * static_cast<double>(c);
                    } else if (k > floor_lv) {
                        n_mid[j] += c;
                    }
                }
            }
        }

        if (opts.track_station_means) {
            station_acc.assign(N, 0.0);
            station_last.assign(N, 0.0);
        }

        result.mode = opts.mode;
        result.N = N;
        result.seed = opts.seed;
        result.burn_in = burn_time;
    }

    int offset(int lv) const { return lv - floor_lv; }
    int cell_of(int o, int j) const { return o * m + j; }

    void flush_station(int s) {
        if (!opts.track_station_means) return;
        station_acc[s] += static_cast<double>(level[s]) * (t - station_last[s]);
        station_last[s] = t;
    }

    void check_conservation() const {
        if (opts.mode != SimMode::Physical) return;
        if (parked + in_transit != static_cast<std::int64_t>(C) * N)
            throw Error(ErrorCode::InvalidArgument,
                        "bike conservation violated (internal simulator fault)", t);
    }

    // ---- physical mode -------------------------------------------------

    void physical_move(int s, int to) {
        int from = level[s];
        flush_station(s);
        occ.flush_cell(offset(from), genv, t, cnt(offset(from), genv));
        occ.flush_cell(offset(to), genv, t, cnt(offset(to), genv));
        --cnt(offset(from), genv);
        ++cnt(offset(to), genv);
        level[s] = to;
        parked += std::max(to, 0) - std::max(from, 0);
    }

    void physical_event(double total, double r_arrival, double r_return) {
        double u = rng.u01() * total;
        if (u < r_arrival) {
            int s = static_cast<int>(rng.below(static_cast<std::uint64_t>(N)));
            int k = level[s];
            if (k >= 1) {
                physical_move(s, k - 1);
                ++in_transit;
            } else if (k > floor_lv) {
                if (rng.u01() < p.alpha) physical_move(s, k - 1);
            } // floor: renter balks
        } else if (u < r_arrival + r_return) {
            int d = static_cast<int>(rng.below(static_cast<std::uint64_t>(N)));
            int k = level[d];
            if (k <= -1) {
                // waiting renter takes the returned bike and departs riding it
                physical_move(d, k + 1);
            } else if (k <= K - 1) {
                physical_move(d, k + 1);
                --in_transit;
            } else if (k <= K + L - 1) {
                if (rng.u01() < p.beta) {
                    physical_move(d, k + 1);
                    --in_transit;
                } // else the bike stays in transit
            } // ceiling: stays in transit
        } else {
            // environment switch; reattribute all occupancy to the new column
            double v = rng.u01() * (-p.env.W(genv, genv));
            int target = genv;
            double cum = 0.0;
            for (int j = 0; j < m; ++j) {
                if (j == genv) continue;
                cum += p.env.W(genv, j);
                if (v < cum) {
                    target = j;
                    break;
                }
            }
            if (target != genv) {
                occ.flush_all(t, cnt);
                for (int o = 0; o < levels; ++o) {
                    cnt(o, target) = cnt(o, genv);
                    cnt(o, genv) = 0;
                }
                genv = target;
            }
        }
        check_conservation();
    }

    // ---- paper-rates mode ----------------------------------------------

    double theta_row(int j) {
        double th = static_cast<double>(C) - s_pos[j] / static_cast<double>(N);
        for (int k = K; k <= K + L - 1; ++k) {
            double x = (1.0 - p.beta) * static_cast<double>(cnt(offset(k), j)) /
                       static_cast<double>(N);
            th += retry_closed_form(x, t);
        }
        th += retry_closed_form(
            static_cast<double>(cnt(offset(ceil_lv), j)) / static_cast<double>(N), t);
        return th;
    }

    bool row_needs_theta(int j) const {
        for (int k = floor_lv; k <= std::min(K - 1, ceil_lv - 1); ++k)
            if (cnt(offset(k), j) > 0) return true;
        if (p.beta > 0.0)
            for (int k = K; k <= K + L - 1; ++k)
                if (cnt(offset(k), j) > 0) return true;
        return false;
    }

    double cell_up_rate(int k, int j, double theta, bool count_clamp) {
        double interaction = static_cast<double>(N - 1) * theta;
        double mu_over_n = p.env.mu[j] / static_cast<double>(N);
        double rate;
        if (k <= 0)
            rate = mu_over_n * (static_cast<double>(C) + interaction);
        else if (k <= C - 1)
            rate = mu_over_n * (static_cast<double>(C - k) + interaction);
        else if (k <= K - 1)
            rate = mu_over_n * interaction;
        else
            rate = p.beta * mu_over_n * interaction;
        if (rate < 0.0) {
            if (count_clamp) ++clamps;
            rate = 0.0;
        }
        return rate;
    }

    void refresh_row(int j) {
        if (!row_dirty[j]) return;
        row_dirty[j] = 0;
        if (!row_needs_theta(j)) {
            up_row[j] = 0.0;
            // occupied waiting-zone cells with beta = 0 contribute no up-rate
            return;
        }
        double theta = theta_row(j);
        double total = 0.0;
        for (int k = floor_lv; k <= ceil_lv - 1; ++k) {
            std::int64_t c = cnt(offset(k), j);
            if (c == 0) continue;
            total += static_cast<double>(c) * cell_up_rate(k, j, theta, true);
        }
        up_row[j] = total;
    }

    double down_rate_row(int j) const {
        return p.env.lambda[j] * (static_cast<double>(n_pos[j]) +
                                  p.alpha * static_cast<double>(n_mid[j]));
    }

    void rates_move(int s, int to) {
        int from = level[s];
        int j = senv[s];
        flush_station(s);
        occ.flush_cell(offset(from), j, t, cnt(offset(from), j));
        occ.flush_cell(offset(to), j, t, cnt(offset(to), j));
        bucket_remove(s);
        --cnt(offset(from), j);
        ++cnt(offset(to), j);
        level[s] = to;
        bucket_insert(s);
        if (from >= 1) {
            --n_pos[j];
            s_pos[j] -= static_cast<double>(from);
        } else if (from > floor_lv) {
            --n_mid[j];
        }
        if (to >= 1) {
            ++n_pos[j];
            s_pos[j] += static_cast<double>(to);
        } else if (to > floor_lv) {
            ++n_mid[j];
        }
        row_dirty[j] = 1;
    }

    void rates_switch_env(int s, int to) {
        int j = senv[s];
        int o = offset(level[s]);
        occ.flush_cell(o, j, t, cnt(o, j));
        occ.flush_cell(o, to, t, cnt(o, to));
        bucket_remove(s);
        --cnt(o, j);
        ++cnt(o, to);
        --n_row[j];
        ++n_row[to];
        int k = level[s];
        if (k >= 1) {
            --n_pos[j];
            ++n_pos[to];
            s_pos[j] -= static_cast<double>(k);
            s_pos[to] += static_cast<double>(k);
        } else if (k > floor_lv) {
            --n_mid[j];
            ++n_mid[to];
        }
        senv[s] = to;
        bucket_insert(s);
        row_dirty[j] = 1;
        row_dirty[to] = 1;
    }

    void bucket_remove(int s) {
        int cell = cell_of(offset(level[s]), senv[s]);
        auto& b = bucket[cell];
        int pos = bucket_pos[s];
        int last = b.back();
        b[pos] = last;
        bucket_pos[last] = pos;
        b.pop_back();
    }

    void bucket_insert(int s) {
        int cell = cell_of(offset(level[s]), senv[s]);
        bucket_pos[s] = static_cast<int>(bucket[cell].size());
        bucket[cell].push_back(s);
    }

    int pick_from_cell(int o, int j) {
        const auto& b = bucket[cell_of(o, j)];
        return b[rng.below(b.size())];
    }

    void up_event_in_row(int j, double u) {
        double theta = theta_row(j);
        int last_positive = INT32_MIN;
        for (int k = floor_lv; k <= ceil_lv - 1; ++k) {
            std::int64_t c = cnt(offset(k), j);
            if (c == 0) continue;
            double w = static_cast<double>(c) * cell_up_rate(k, j, theta, false);
            if (w <= 0.0) continue;
            last_positive = k;
            if (u < w) {
                rates_move(pick_from_cell(offset(k), j), k + 1);
                return;
            }
            u -= w;
        }
        // rounding slack: attribute to the last cell with positive rate
        if (last_positive != INT32_MIN)
            rates_move(pick_from_cell(offset(last_positive), j), last_positive + 1);
    }

    void down_event_in_row(int j, double u) {
        double w_pos = p.env.lambda[j] * static_cast<double>(n_pos[j]);
        int lo, hi;
        double v; // count coordinate within the chosen class
        if (u < w_pos) {
            lo = 1;
            hi = ceil_lv;
            v = u / p.env.lambda[j];
        } else {
            lo = floor_lv + 1;
            hi = 0;
            v = (u - w_pos) / (p.env.lambda[j] * p.alpha);
        }
        double cum = 0.0;
        int last_occupied = INT32_MIN;
        for (int k = lo; k <= hi; ++k) {
            std::int64_t c = cnt(offset(k), j);
            if (c == 0) continue;
            last_occupied = k;
            cum += static_cast<double>(c);
            if (v < cum) {
                rates_move(pick_from_cell(offset(k), j), k - 1);
                return;
            }
        }
        if (last_occupied != INT32_MIN)
            rates_move(pick_from_cell(offset(last_occupied), j), last_occupied - 1);
    }

    void env_event_in_row(int j, double u) {
        // uniform station within the row, then target state
        double v = u / (-p.env.W(j, j)); // in [0, n_row[j])
        double cum = 0.0;
        int station = -1;
        for (int o = 0; o < levels; ++o) {
            std::int64_t c = cnt(o, j);
            if (c == 0) continue;
            cum += static_cast<double>(c);
            if (v < cum || o == levels - 1) {
                station = pick_from_cell(o, j);
                break;
            }
        }
        if (station < 0) {
            for (int o = levels - 1; o >= 0; --o)
                if (cnt(o, j) > 0) {
                    station = pick_from_cell(o, j);
                    break;
                }
        }
        if (station < 0) return;
        double w = rng.u01() * (-p.env.W(j, j));
        double cw = 0.0;
        int target = j;
        for (int jj = 0; jj < m; ++jj) {
            if (jj == j) continue;
            cw += p.env.W(j, jj);
            if (w < cw) {
                target = jj;
                break;
            }
        }
        if (target != j) rates_switch_env(station, target);
    }

    void rates_event(double total, const std::vector<double>& down_rows,
                     const std::vector<double>& env_rows) {
        double u = rng.u01() * total;
        // up moves first, then down, then environment switches
        for (int j = 0; j < m; ++j) {
            if (u < up_row[j]) {
                up_event_in_row(j, u);
                return;
            }
            u -= up_row[j];
        }
        for (int j = 0; j < m; ++j) {
            if (u < down_rows[j]) {
                down_event_in_row(j, u);
                return;
            }
            u -= down_rows[j];
        }
        for (int j = 0; j < m; ++j) {
            if (u < env_rows[j]) {
                env_event_in_row(j, u);
                return;
            }
            u -= env_rows[j];
        }
        // numerical slack past the last class: no-op
    }

    // ---- main loop -------------------------------------------------------

    template <typename SampleHook>
    void run_loop(SampleHook&& on_sample) {
        const double horizon = opts.horizon;
        double next_sample = opts.sample_dt > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        bool burn_pending = burn_time > 0.0;

        std::vector<double> down_rows(m), env_rows(m);

        auto record_sample = [&]() {
            if (store_snapshots) {
                result.sample_times.push_back(t);
                result.samples.push_back(cnt.cast<double>() / static_cast<double>(N));
            }
            on_sample(t, cnt);
        };
        if (opts.sample_dt > 0.0) {
            record_sample();
            next_sample = opts.sample_dt;
        } else {
            on_sample(t, cnt);
        }
        if (burn_time == 0.0) {
            occ.flush_all(t, cnt);
            acc_at_burn = occ.acc;
            burn_recorded = true;
            burn_pending = false;
        }

        while (t < horizon) {
            if (opts.max_events >= 0 && events >= opts.max_events) break;

            double total = 0.0;
            double r_arrival = 0.0, r_return = 0.0;
            if (opts.mode == SimMode::Physical) {
                r_arrival = static_cast<double>(N) * p.env.lambda[genv];
                r_return = static_cast<double>(in_transit) * p.env.mu[genv];
                total = r_arrival + r_return - p.env.W(genv, genv);
            } else {
                for (int j = 0; j < m; ++j) refresh_row(j);
                total = 0.0;
                for (int j = 0; j < m; ++j) {
                    down_rows[j] = down_rate_row(j);
                    env_rows[j] = -p.env.W(j, j) * static_cast<double>(n_row[j]);
                    total += up_row[j] + down_rows[j] + env_rows[j];
                }
            }

            double next_mark = std::min({horizon,
                                         burn_pending ? burn_time : std::numeric_limits<double>::infinity(),
                                         next_sample});
            if (total <= 0.0) {
                t = next_mark;
            } else {
                double dt = rng.expo(total);
                if (t + dt >= next_mark) {
                    t = next_mark;
                } else {
                    t += dt;
                    if (opts.mode == SimMode::Physical)
                        physical_event(total, r_arrival, r_return);
                    else
                        rates_event(total, down_rows, env_rows);
                    ++events;
                    continue;
                }
            }

            // at a scheduled mark
            if (burn_pending && t >= burn_time) {
                occ.flush_all(t, cnt);
                acc_at_burn = occ.acc;
                burn_recorded = true;
                burn_pending = false;
            }
            if (opts.sample_dt > 0.0 && t >= next_sample) {
                record_sample();
                next_sample += opts.sample_dt;
            }
            if (t >= horizon) break;
        }

        occ.flush_all(t, cnt);
        if (!burn_recorded) {
            acc_at_burn = occ.acc; // horizon ended inside the burn-in window
            burn_time = t;
        }
        if (opts.track_station_means) {
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(N); ++i) flush_station(static_cast<int>(i));
        }

        result.elapsed = t;
        result.events = events;
        result.clamp_events = clamps;
        result.burn_in = burn_time;
        double window = std::max(t - burn_time, 1e-300);
        result.time_avg = (occ.acc - acc_at_burn) / (window * static_cast<double>(N));
        if (opts.track_station_means) {
            result.station_mean_level.resize(N);
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(N); ++i)
                result.station_mean_level[i] = station_acc[i] / std::max(t - 0.0, 1e-300);
        }
    }
};

} // namespace

std::string to_string(SimMode mode) {
    return mode == SimMode::Physical ? "physical" : "paper-rates";
}

SimMode sim_mode_from_string(const std::string& name) {
    if (name == "physical") return SimMode::Physical;
    if (name == "paper-rates") return SimMode::PaperRates;
    throw Error(ErrorCode::InvalidArgument, "unknown simulation mode: " + name);
}

Eigen::VectorXd SimResult::time_avg_level_marginal() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(time_avg.rows());
    for (Eigen::Index k = 0; k < time_avg.rows(); ++k) out[k] = time_avg.row(k).sum();
    return out;
}

SimResult run(const ModelParams& p, const SimOptions& opts) {
    Engine engine(p, opts);
    engine.run_loop([](double, const Eigen::MatrixXi&) {});
    return std::move(engine.result);
}

std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t x = master ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    return Rng::splitmix64(x);
}

namespace {

// Falling-factorial tuple counts: ordered distinct subsets of stations by level.
void accumulate_tuples(int subset, const Eigen::VectorXd& c, std::vector<double>& joint) {
    const int n = static_cast<int>(c.size());
    if (subset == 1) {
        for (int a = 0; a < n; ++a) joint[a] += c[a];
        return;
    }
    if (subset == 2) {
        for (int a = 0; a < n; ++a) {
            if (c[a] == 0.0) continue;
            double* row = joint.data() + static_cast<std::size_t>(a) * n;
            for (int b = 0; b < n; ++b) {
                double v = c[a] * c[b];
                if (a == b) v -= c[a];
                row[b] += v;
            }
        }
        return;
    }
    for (int a = 0; a < n; ++a) {
        if (c[a] == 0.0) continue;
        for (int b = 0; b < n; ++b) {
            if (c[b] == 0.0 && a != b) continue;
            for (int d = 0; d < n; ++d) {
                double v = c[a] * c[b] * c[d];
                if (a == b) v -= c[a] * c[d];
                if (a == d) v -= c[a] * c[b];
                if (b == d) v -= c[b] * c[a];
                if (a == b && b == d) v += 2.0 * c[a];
                joint[(static_cast<std::size_t>(a) * n + b) * n + d] += v;
            }
        }
    }
}

double tv_joint_vs_product(int subset, int n, const std::vector<double>& joint,
                           const Eigen::VectorXd& marg) {
    double tv = 0.0;
    if (subset == 1) {
        for (int a = 0; a < n; ++a) tv += std::abs(joint[a] - marg[a]);
    } else if (subset == 2) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                tv += std::abs(joint[static_cast<std::size_t>(a) * n + b] - marg[a] * marg[b]);
    } else {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int d = 0; d < n; ++d)
                    tv += std::abs(joint[(static_cast<std::size_t>(a) * n + b) * n + d] -
                                   marg[a] * marg[b] * marg[d]);
    }
    return 0.5 * tv;
}

} // namespace

ChaosResult chaos_check(const ModelParams& p, const SimOptions& opts, int subset_size,
                        int n_blocks, int n_bootstrap, double grid_dt) {
    if (subset_size < 1 || subset_size > 3)
        throw Error(ErrorCode::InvalidArgument, "subset size must be 1, 2 or 3");
    if (subset_size > opts.N)
        throw Error(ErrorCode::InvalidArgument, "subset size exceeds the station count");
    if (n_blocks < 1) throw Error(ErrorCode::InvalidArgument, "need at least one block");

    const int levels = p.num_levels();
    const std::size_t joint_size = static_cast<std::size_t>(
        std::pow(static_cast<double>(levels), subset_size));

    SimOptions run_opts = opts;
    run_opts.sample_dt = grid_dt;

    std::vector<std::vector<double>> joint_blocks(n_blocks, std::vector<double>(joint_size, 0.0));
    std::vector<Eigen::VectorXd> marg_blocks(n_blocks, Eigen::VectorXd::Zero(levels));
    std::vector<std::int64_t> samples_per_block(n_blocks, 0);

    const double burn = opts.burn_in_frac * opts.horizon;
    const double span = opts.horizon - burn;

    Engine engine(p, run_opts);
    engine.store_snapshots = false;
    Eigen::VectorXd level_counts(levels);
    engine.run_loop([&](double t, const Eigen::MatrixXi& cnt) {
        if (t < burn || span <= 0.0) return;
        int block = std::min(n_blocks - 1,
                             static_cast<int>((t - burn) / span * n_blocks));
        for (int k = 0; k < levels; ++k) level_counts[k] = static_cast<double>(cnt.row(k).sum());
        accumulate_tuples(subset_size, level_counts, joint_blocks[block]);
        marg_blocks[block] += level_counts;
        ++samples_per_block[block];
    });

    ChaosResult res;
    res.subset_size = subset_size;
    res.blocks = n_blocks;

    auto combine = [&](const std::vector<int>& picks, std::vector<double>& joint_out,
                       Eigen::VectorXd& marg_out) -> std::int64_t {
        std::fill(joint_out.begin(), joint_out.end(), 0.0);
        marg_out.setZero();
        std::int64_t total_samples = 0;
        for (int b : picks) {
            for (std::size_t i = 0; i < joint_size; ++i) joint_out[i] += joint_blocks[b][i];
            marg_out += marg_blocks[b];
            total_samples += samples_per_block[b];
        }
        if (total_samples == 0) return 0;
        double tuples = 1.0;
        for (int i = 0; i < subset_size; ++i)
            tuples *= static_cast<double>(opts.N - i);
        double jnorm = tuples * static_cast<double>(total_samples);
        double mnorm = static_cast<double>(opts.N) * static_cast<double>(total_samples);
        for (auto& v : joint_out) v /= jnorm;
        marg_out /= mnorm;
        return total_samples;
    };

    std::vector<int> all_blocks(n_blocks);
    for (int b = 0; b < n_blocks; ++b) all_blocks[b] = b;
    std::vector<double> joint(joint_size, 0.0);
    Eigen::VectorXd marg(levels);
    res.samples = combine(all_blocks, joint, marg);
    res.joint = joint;
    res.marginal = marg;
    res.tv = res.samples > 0 ? tv_joint_vs_product(subset_size, levels, joint, marg) : 0.0;

    if (n_bootstrap > 0 && res.samples > 0) {
        Rng boot_rng(opts.seed ^ 0x0b0075eedULL);
        std::vector<double> tvs(n_bootstrap);
        std::vector<int> picks(n_blocks);
        std::vector<double> jtmp(joint_size, 0.0);
        Eigen::VectorXd mtmp(levels);
        for (int r = 0; r < n_bootstrap; ++r) {
            for (int b = 0; b < n_blocks; ++b)
                picks[b] = static_cast<int>(boot_rng.below(static_cast<std::uint64_t>(n_blocks)));
            std::int64_t s = combine(picks, jtmp, mtmp);
            tvs[r] = s > 0 ? tv_joint_vs_product(subset_size, levels, jtmp, mtmp) : 0.0;
        }
        std::sort(tvs.begin(), tvs.end());
        auto pick_pct = [&](double q) {
            int idx = static_cast<int>(q * (n_bootstrap - 1));
            return tvs[std::clamp(idx, 0, n_bootstrap - 1)];
        };
        res.tv_ci_lo = pick_pct(0.025);
        res.tv_ci_hi = pick_pct(0.975);
    }
    return res;
}

std::vector<ConvergenceRow> convergence_sweep(const ModelParams& p,
                                              const std::vector<std::int64_t>& n_list,
                                              double horizon,
                                              const std::vector<std::uint64_t>& seeds,
                                              SimMode mode,
                                              const Eigen::VectorXd& reference_level_marginal,
                                              int threads) {
    std::vector<std::pair<std::int64_t, std::uint64_t>> jobs;
    for (auto n : n_list)
        for (auto s : seeds) jobs.emplace_back(n, s);

    std::vector<ConvergenceRow> rows(jobs.size());
    int n_threads = threads > 0 ? threads
                                : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n_threads = std::min<int>(n_threads, static_cast<int>(jobs.size()));

    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= jobs.size()) return;
            SimOptions o;
            o.N = jobs[i].first;
            o.seed = jobs[i].second;
            o.horizon = horizon;
            o.mode = mode;
            SimResult r = run(p, o);
            rows[i] = {jobs[i].first, jobs[i].second,
                       total_variation(r.time_avg_level_marginal(), reference_level_marginal)};
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return rows;
}

} // namespace bsmf
