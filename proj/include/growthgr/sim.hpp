#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "growthgr/common.hpp"
#include "growthgr/config.hpp"
#include "growthgr/rng.hpp"

namespace growthgr {

// Synthetic marketplace. Every stochastic draw is keyed by
// (seed, tag, day, ids) rather than by draw order, so a world re-run from any
// day reproduces the original run exactly and a twin run that flips a single
// click shares all other random draws (common random numbers).

struct SimConfig {
  uint64_t seed = 7;
  int n_users = 10000;
  int n_items = 20000;
  int n_segments = 8;
  int d = 16;
  int days = 60;
  double new_per_day = 33.0;
  int exposures = 20;       // slots per session
  int log_candidates = 40;  // ranked candidate ids kept per session log
  int history_cap = 10;

  // latent geometry
  double user_noise = 0.6;
  double item_noise = 0.6;
  double query_noise = 0.5;
  double intent_loyalty = 0.7;  // P(query segment == user segment)
  double quality_norm_w = 0.8;  // quality loading on latent norm
  double quality_noise = 0.6;

  // ranking and candidate generation
  double w_user = 0.5, w_query = 0.5;
  double gamma_pop = 0.22;
  double delta_seg = 0.9;
  int pop_shortlist = 150;
  int seg_shortlist = 150;
  int explore_per_session = 40;

  // click / purchase heads
  double click_aff = 1.6, click_q = 0.9, click_bias = -2.3;
  double buy_aff = 1.2, buy_q = 0.8, buy_bias = -1.8;

  // feedback dynamics
  double pop_click_gain = 1.0;
  double pop_neg = 0.08;
  double pop_init = 1.2;           // scale of mature items' initial popularity
  double ripple_kappa = 0.9;       // segment-efficiency gain per qualifying click
  double ripple_affinity_min = 0.35;
  int new_item_window = 30;

  // channel blending
  int channel_slots = 4;
  int channel_topk = 20;

  static SimConfig from(const Config& c, const std::string& prefix = "sim.") {
    SimConfig s;
    auto I = [&](const char* k, int64_t v) { return static_cast<int>(c.get_int(prefix + k, v)); };
    auto D = [&](const char* k, double v) { return c.get_double(prefix + k, v); };
    s.seed = static_cast<uint64_t>(c.get_int("seed", static_cast<int64_t>(s.seed)));
    s.n_users = I("users", s.n_users);
    s.n_items = I("items", s.n_items);
    s.n_segments = I("segments", s.n_segments);
    s.d = I("dim", s.d);
    s.days = I("days", s.days);
    s.new_per_day = D("new_per_day", s.new_per_day);
    s.exposures = I("exposures", s.exposures);
    s.log_candidates = I("log_candidates", s.log_candidates);
    s.history_cap = I("history_cap", s.history_cap);
    s.gamma_pop = D("gamma_pop", s.gamma_pop);
    s.delta_seg = D("delta_seg", s.delta_seg);
    s.pop_shortlist = I("pop_shortlist", s.pop_shortlist);
    s.seg_shortlist = I("seg_shortlist", s.seg_shortlist);
    s.explore_per_session = I("explore", s.explore_per_session);
    s.intent_loyalty = D("intent_loyalty", s.intent_loyalty);
    s.click_aff = D("click_aff", s.click_aff);
    s.click_q = D("click_q", s.click_q);
    s.click_bias = D("click_bias", s.click_bias);
    s.buy_aff = D("buy_aff", s.buy_aff);
    s.buy_q = D("buy_q", s.buy_q);
    s.buy_bias = D("buy_bias", s.buy_bias);
    s.pop_click_gain = D("pop_click_gain", s.pop_click_gain);
    s.pop_neg = D("pop_neg", s.pop_neg);
    s.pop_init = D("pop_init", s.pop_init);
    s.ripple_kappa = D("ripple_kappa", s.ripple_kappa);
    s.ripple_affinity_min = D("ripple_affinity_min", s.ripple_affinity_min);
    s.channel_slots = I("channel_slots", s.channel_slots);
    s.channel_topk = I("channel_topk", s.channel_topk);
    return s;
  }

  void validate() const {
    GGR_CHECK(n_users >= 0 && n_items >= 1 && n_segments >= 1 && d >= 1 && days >= 1,
              config_error("sim: counts must be positive"));
    GGR_CHECK(exposures >= 1 && history_cap >= 1, config_error("sim: bad session shape"));
    GGR_CHECK(new_per_day >= 0.0, config_error("sim: new_per_day must be >= 0"));
  }

  int n_new() const {
    int n = static_cast<int>(new_per_day * days);
    return std::min(n, n_items / 2);
  }

  int horizon() const { return days + new_item_window + 10; }
};

struct WorldStatic {
  std::vector<double> user_lat;     // n_users * d
  std::vector<int> user_seg;
  std::vector<double> item_lat;     // n_items * d
  std::vector<int> item_seg;
  std::vector<double> quality;
  std::vector<double> price;
  std::vector<int> launch_day;
  std::vector<double> seg_centroid; // n_segments * d
};

struct SessionRec {
  uint64_t id = 0;
  int day = 0;
  uint32_t user = 0;
  int qseg = 0;
  std::vector<uint32_t> candidates;  // ranked, includes every exposed item
  std::vector<uint32_t> exposed;
  std::vector<uint32_t> clicked;
  std::vector<uint32_t> purchased;
  std::vector<uint32_t> history;     // user's click history before this session
};

struct SimWorld {
  SimConfig cfg;
  std::shared_ptr<const WorldStatic> st;
  int day = 0;
  std::vector<double> pop;                      // popularity prior, floor 0
  std::vector<double> segeff;                   // n_items * n_segments
  std::vector<std::vector<uint32_t>> history;   // per user
  std::vector<uint16_t> orders;                 // n_items * horizon
  std::vector<double> gmv;                      // n_items * horizon

  const double* user_vec(uint32_t u) const { return st->user_lat.data() + size_t(u) * cfg.d; }
  const double* item_vec(uint32_t i) const { return st->item_lat.data() + size_t(i) * cfg.d; }
  bool launched(uint32_t i) const { return st->launch_day[i] <= day; }
  int age(uint32_t i) const { return day - st->launch_day[i]; }
  bool is_new(uint32_t i) const { return launched(i) && age(i) <= cfg.new_item_window; }
  uint16_t orders_on(uint32_t i, int d) const { return orders[size_t(i) * cfg.horizon() + d]; }
  double gmv_on(uint32_t i, int d) const { return gmv[size_t(i) * cfg.horizon() + d]; }

  uint64_t dynamic_hash() const {
    uint64_t h = fnv1a64(pop.data(), pop.size() * sizeof(double));
    h = fnv1a64(segeff.data(), segeff.size() * sizeof(double), h);
    h = fnv1a64(orders.data(), orders.size() * sizeof(uint16_t), h);
    for (const auto& hist : history)
      h = fnv1a64(hist.data(), hist.size() * sizeof(uint32_t), h);
    return h;
  }
};

enum class AbMode { kNone, kUserSide, kItemCoupled };

struct AbSetup {
  AbMode mode = AbMode::kNone;
  int n_buckets = 2;
  std::vector<int> channel_buckets;  // user buckets served by the channel

  bool channel_for(int bucket) const {
    return std::find(channel_buckets.begin(), channel_buckets.end(), bucket) !=
           channel_buckets.end();
  }
};

inline int user_bucket(uint32_t user, int n_buckets) {
  return static_cast<int>(mix64(seed_mix(0x75736572ULL, user)) % uint64_t(n_buckets));
}

inline int item_bucket(uint32_t item, int n_buckets) {
  return static_cast<int>(mix64(seed_mix(0x6974656dULL, item)) % uint64_t(n_buckets));
}

// Retrieval hook: ranked item ids for a (user, query) pair; the simulator
// keeps only launched new items from it.
using ChannelFn =
    std::function<std::vector<uint32_t>(const SimWorld&, int day, uint32_t user,
                                        const std::vector<double>& query, int qseg)>;

struct Intervention {
  uint64_t session_id = 0;
  uint32_t item = 0;
  bool force_click = false;
};

struct RunHooks {
  const ChannelFn* channel = nullptr;
  const AbSetup* ab = nullptr;
  const Intervention* intervention = nullptr;
  std::vector<SessionRec>* logs = nullptr;
};

inline uint64_t session_id_of(int day, uint32_t user, int n_users) {
  return uint64_t(day) * uint64_t(n_users) + user;
}

inline SimWorld generate_world(const SimConfig& cfg) {
  cfg.validate();
  auto st = std::make_shared<WorldStatic>();
  double cscale = 1.0 / std::sqrt(double(cfg.d));
  st->seg_centroid.resize(size_t(cfg.n_segments) * cfg.d);
  for (int s = 0; s < cfg.n_segments; ++s) {
    Rng rng(seed_mix(cfg.seed, 0x736567ULL, s));
    for (int k = 0; k < cfg.d; ++k) st->seg_centroid[size_t(s) * cfg.d + k] = rng.normal() * cscale;
  }

  st->user_lat.resize(size_t(cfg.n_users) * cfg.d);
  st->user_seg.resize(cfg.n_users);
  for (int u = 0; u < cfg.n_users; ++u) {
    Rng rng(seed_mix(cfg.seed, 0x757372ULL, u));
    int s = rng.uniform_int(cfg.n_segments);
    st->user_seg[u] = s;
    for (int k = 0; k < cfg.d; ++k)
      st->user_lat[size_t(u) * cfg.d + k] =
          st->seg_centroid[size_t(s) * cfg.d + k] + cfg.user_noise * cscale * rng.normal();
  }

  int n_new = cfg.n_new();
  int n_mature = cfg.n_items - n_new;
  st->item_lat.resize(size_t(cfg.n_items) * cfg.d);
  st->item_seg.resize(cfg.n_items);
  st->quality.resize(cfg.n_items);
  st->price.resize(cfg.n_items);
  st->launch_day.resize(cfg.n_items);
  double mean_norm2 = 1.0 + cfg.item_noise * cfg.item_noise;  // E ||item||^2
  for (int i = 0; i < cfg.n_items; ++i) {
    Rng rng(seed_mix(cfg.seed, 0x69746dULL, i));
    int s = rng.uniform_int(cfg.n_segments);
    st->item_seg[i] = s;
    double norm2 = 0.0;
    for (int k = 0; k < cfg.d; ++k) {
      double v = st->seg_centroid[size_t(s) * cfg.d + k] + cfg.item_noise * cscale * rng.normal();
      st->item_lat[size_t(i) * cfg.d + k] = v;
      norm2 += v * v;
    }
    double znorm = (norm2 - mean_norm2) / (0.5 * mean_norm2);
    double q = cfg.quality_norm_w * znorm + cfg.quality_noise * rng.normal();
    st->quality[i] = std::clamp(q, -2.0, 2.0);
    st->price[i] = std::exp(0.25 * rng.normal() + 0.1 * st->quality[i]);
    if (i < n_mature)
      st->launch_day[i] = -2 * cfg.new_item_window;
    else
      st->launch_day[i] = n_new > 0 ? int((int64_t(i - n_mature) * cfg.days) / n_new) : 0;
  }

  SimWorld w;
  w.cfg = cfg;
  w.st = st;
  w.day = 0;
  w.pop.assign(cfg.n_items, 0.0);
  for (int i = 0; i < n_mature; ++i) {
    Rng rng(seed_mix(cfg.seed, 0x706f70ULL, i));
    w.pop[i] = cfg.pop_init * std::exp(1.0 * st->quality[i] + 0.8 * rng.normal());
  }
  w.segeff.assign(size_t(cfg.n_items) * cfg.n_segments, 0.0);
  w.history.assign(size_t(std::max(cfg.n_users, 1)), {});
  w.orders.assign(size_t(cfg.n_items) * cfg.horizon(), 0);
  w.gmv.assign(size_t(cfg.n_items) * cfg.horizon(), 0.0);
  return w;
}

namespace detail {

struct Scored {
  double score;
  uint32_t id;
  bool operator<(const Scored& o) const {
    if (score != o.score) return score > o.score;
    return id < o.id;
  }
};

// Deterministic top-k by (score desc, id asc).
inline void top_k(std::vector<Scored>& v, size_t k) {
  if (v.size() > k) {
    std::nth_element(v.begin(), v.begin() + k, v.end());
    v.resize(k);
  }
  std::sort(v.begin(), v.end());
}

}  // namespace detail

// One simulated day. Each user issues one query; the internal system ranks
// candidates by affinity + popularity + segment efficiency; exposures without
// a click decay the popularity prior, clicks feed it, and clicks from
// high-affinity users raise the item's per-segment distribution efficiency
// (strongest while the item is young).
inline void run_day(SimWorld& w, const RunHooks& hooks = {}) {
  const SimConfig& cfg = w.cfg;
  const WorldStatic& st = *w.st;
  const int day = w.day;
  const int S = cfg.n_segments;

  // day-level shortlists over launched items
  std::vector<uint32_t> launched;
  launched.reserve(st.launch_day.size());
  for (uint32_t i = 0; i < uint32_t(cfg.n_items); ++i)
    if (w.launched(i)) launched.push_back(i);

  std::vector<detail::Scored> pop_short;
  pop_short.reserve(launched.size());
  for (uint32_t i : launched)
    pop_short.push_back({cfg.gamma_pop * std::log1p(w.pop[i]) + 0.1 * st.quality[i], i});
  detail::top_k(pop_short, size_t(cfg.pop_shortlist));

  std::vector<std::vector<detail::Scored>> seg_short(S);
  for (int s = 0; s < S; ++s) {
    auto& list = seg_short[s];
    list.reserve(launched.size());
    const double* c = st.seg_centroid.data() + size_t(s) * cfg.d;
    for (uint32_t i : launched) {
      double a = dot(c, w.item_vec(i), cfg.d);
      list.push_back({a + cfg.gamma_pop * std::log1p(w.pop[i]) +
                          cfg.delta_seg * w.segeff[size_t(i) * S + s],
                      i});
    }
    detail::top_k(list, size_t(cfg.seg_shortlist));
  }

  std::vector<double> qvec(cfg.d);
  std::vector<detail::Scored> cand;
  std::vector<uint32_t> ids;
  for (uint32_t u = 0; u < uint32_t(cfg.n_users); ++u) {
    uint64_t sid = session_id_of(day, u, cfg.n_users);
    int ubucket = hooks.ab && hooks.ab->mode != AbMode::kNone
                      ? user_bucket(u, hooks.ab->n_buckets)
                      : 0;
    bool coupled = hooks.ab && hooks.ab->mode == AbMode::kItemCoupled;
    bool channel_on = hooks.channel &&
                      (!hooks.ab || hooks.ab->mode == AbMode::kNone || hooks.ab->channel_for(ubucket));

    // intent segment and query vector
    Rng qrng(seed_mix(cfg.seed, 0x717279ULL, day, u));
    int useg = st.user_seg[u];
    int qseg = qrng.bernoulli(cfg.intent_loyalty) ? useg : qrng.uniform_int(S);
    double cscale = 1.0 / std::sqrt(double(cfg.d));
    for (int k = 0; k < cfg.d; ++k)
      qvec[k] = st.seg_centroid[size_t(qseg) * cfg.d + k] + cfg.query_noise * cscale * qrng.normal();

    auto bucket_ok = [&](uint32_t i) {
      if (!coupled || !w.is_new(i)) return true;
      return item_bucket(i, hooks.ab->n_buckets) == ubucket;
    };

    // assemble candidates
    ids.clear();
    for (const auto& sc : pop_short) ids.push_back(sc.id);
    for (const auto& sc : seg_short[qseg]) ids.push_back(sc.id);
    if (!launched.empty()) {
      Rng erng(seed_mix(cfg.seed, 0x657870ULL, day, u));
      for (int e = 0; e < cfg.explore_per_session; ++e)
        ids.push_back(launched[erng.uniform_int(int(launched.size()))]);
    }
    std::vector<uint32_t> channel_items;
    if (channel_on) {
      channel_items = (*hooks.channel)(w, day, u, qvec, qseg);
      for (uint32_t i : channel_items)
        if (i < uint32_t(cfg.n_items)) ids.push_back(i);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    const double* uv = w.user_vec(u);
    cand.clear();
    for (uint32_t i : ids) {
      if (!bucket_ok(i)) continue;
      double aff = cfg.w_user * dot(uv, w.item_vec(i), cfg.d) +
                   cfg.w_query * dot(qvec.data(), w.item_vec(i), cfg.d);
      double score = aff + cfg.gamma_pop * std::log1p(w.pop[i]) +
                     cfg.delta_seg * w.segeff[size_t(i) * S + qseg];
      cand.push_back({score, i});
    }
    std::sort(cand.begin(), cand.end());

    // exposures: organic top slots plus blended channel items
    int slots = cfg.exposures;
    std::vector<uint32_t> exposed;
    exposed.reserve(slots);
    int organic_slots = slots;
    std::vector<uint32_t> blended;
    if (channel_on && !channel_items.empty()) {
      for (uint32_t i : channel_items) {
        if (int(blended.size()) >= cfg.channel_slots) break;
        if (i >= uint32_t(cfg.n_items) || !w.is_new(i) || !bucket_ok(i)) continue;
        blended.push_back(i);
      }
      organic_slots = slots - int(blended.size());
    }
    for (const auto& sc : cand) {
      if (int(exposed.size()) >= organic_slots) break;
      bool in_channel = std::find(blended.begin(), blended.end(), sc.id) != blended.end();
      if (!in_channel) exposed.push_back(sc.id);
    }
    for (uint32_t i : blended) exposed.push_back(i);

    SessionRec rec;
    if (hooks.logs) {
      rec.id = sid;
      rec.day = day;
      rec.user = u;
      rec.qseg = qseg;
      rec.history = w.history[u];
      for (const auto& sc : cand) {
        if (int(rec.candidates.size()) >= cfg.log_candidates) break;
        rec.candidates.push_back(sc.id);
      }
      for (uint32_t i : exposed)
        if (std::find(rec.candidates.begin(), rec.candidates.end(), i) == rec.candidates.end())
          rec.candidates.push_back(i);
      rec.exposed = exposed;
    }

    // click / purchase outcomes with per-event seeds
    for (uint32_t i : exposed) {
      double aff = cfg.w_user * dot(uv, w.item_vec(i), cfg.d) +
                   cfg.w_query * dot(qvec.data(), w.item_vec(i), cfg.d);
      double pclick =
          1.0 / (1.0 + std::exp(-(cfg.click_aff * aff + cfg.click_q * st.quality[i] + cfg.click_bias)));
      Rng crng(seed_mix(cfg.seed, 0x636c6bULL, day, u, i));
      bool click = crng.uniform() < pclick;
      if (hooks.intervention && hooks.intervention->session_id == sid &&
          hooks.intervention->item == i)
        click = hooks.intervention->force_click;
      if (click) {
        w.pop[i] += cfg.pop_click_gain;
        if (aff >= cfg.ripple_affinity_min) {
          double decay =
              std::max(0.0, double(cfg.new_item_window - w.age(i)) / cfg.new_item_window);
          w.segeff[size_t(i) * S + useg] += cfg.ripple_kappa * decay;
        }
        auto& hist = w.history[u];
        hist.push_back(i);
        if (int(hist.size()) > cfg.history_cap)
          hist.erase(hist.begin(), hist.begin() + (hist.size() - cfg.history_cap));
        double pbuy =
            1.0 / (1.0 + std::exp(-(cfg.buy_aff * aff + cfg.buy_q * st.quality[i] + cfg.buy_bias)));
        Rng brng(seed_mix(cfg.seed, 0x627579ULL, day, u, i));
        if (brng.uniform() < pbuy) {
          w.orders[size_t(i) * cfg.horizon() + day] += 1;
          w.gmv[size_t(i) * cfg.horizon() + day] += st.price[i];
          if (hooks.logs) rec.purchased.push_back(i);
        }
        if (hooks.logs) rec.clicked.push_back(i);
      } else {
        w.pop[i] = std::max(0.0, w.pop[i] - cfg.pop_neg);
      }
    }
    if (hooks.logs) hooks.logs->push_back(std::move(rec));
  }
  ++w.day;
}

inline void run_days(SimWorld& w, int n, const RunHooks& hooks = {}) {
  for (int i = 0; i < n; ++i) run_day(w, hooks);
}

// Gini coefficient over non-negative counts (0 when everything is zero).
inline double gini(std::vector<double> x) {
  if (x.empty()) return 0.0;
  std::sort(x.begin(), x.end());
  double total = 0.0, weighted = 0.0;
  int n = int(x.size());
  for (int i = 0; i < n; ++i) {
    total += x[i];
    weighted += (2.0 * (i + 1) - n - 1) * x[i];
  }
  if (total <= 0.0) return 0.0;
  return weighted / (n * total);
}

// Exposure Gini over the full launched catalog for one logged day.
inline double exposure_gini(const SimWorld& w, const std::vector<SessionRec>& logs, int day) {
  std::vector<double> counts(w.cfg.n_items, 0.0);
  for (const auto& s : logs) {
    if (s.day != day) continue;
    for (uint32_t i : s.exposed) counts[i] += 1.0;
  }
  std::vector<double> launched;
  for (int i = 0; i < w.cfg.n_items; ++i)
    if (w.st->launch_day[i] <= day) launched.push_back(counts[i]);
  return gini(std::move(launched));
}

// ---------------------------------------------------------------------------
// Counterfactual uplift oracle via twin simulation.

struct OracleRequest {
  uint64_t session_id = 0;
  uint32_t item = 0;
};

struct OracleResult {
  double y_click = 0.0;     // avg daily orders, days 31..37 post launch, click forced
  double y_noclick = 0.0;   // same window, click suppressed
  double delta() const { return y_click - y_noclick; }
};

// Average daily orders of `item` over its post-launch outcome window.
inline double outcome_window_orders(const SimWorld& w, uint32_t item) {
  int lo = w.st->launch_day[item] + w.cfg.new_item_window + 1;
  int hi = lo + 6;
  double total = 0.0;
  for (int d = lo; d <= hi; ++d)
    if (d >= 0 && d < w.cfg.horizon()) total += w.orders_on(item, d);
  return total / 7.0;
}

inline double outcome_window_gmv(const SimWorld& w, uint32_t item) {
  int lo = w.st->launch_day[item] + w.cfg.new_item_window + 1;
  int hi = lo + 6;
  double total = 0.0;
  for (int d = lo; d <= hi; ++d)
    if (d >= 0 && d < w.cfg.horizon()) total += w.gmv_on(item, d);
  return total / 7.0;
}

// Re-runs the world from day 0 (bit-identical to the logged run), snapshots
// at each interaction day, and runs forced-click / suppressed-click twins to
// the end of the item's outcome window. Requests must be logged exposures.
inline std::vector<OracleResult> uplift_oracle_batch(const SimConfig& cfg,
                                                     const std::vector<SessionRec>& logs,
                                                     std::vector<OracleRequest> reqs,
                                                     const ChannelFn* channel = nullptr,
                                                     const AbSetup* ab = nullptr) {
  cfg.validate();
  // validate requests against the logged run
  std::map<uint64_t, const SessionRec*> by_id;
  for (const auto& s : logs) by_id[s.id] = &s;
  struct Job {
    int day;
    size_t pos;
    OracleRequest req;
    int end_day;
  };
  std::vector<Job> jobs;
  for (size_t r = 0; r < reqs.size(); ++r) {
    auto it = by_id.find(reqs[r].session_id);
    GGR_CHECK(it != by_id.end(), lookup_error("oracle: unknown session"));
    const SessionRec& s = *it->second;
    GGR_CHECK(std::find(s.exposed.begin(), s.exposed.end(), reqs[r].item) != s.exposed.end(),
              lookup_error("oracle: interaction is not a logged exposure"));
    int end_day =
        std::min(cfg.days, int(0) + /* launch resolved later */ 0);
    (void)end_day;
    jobs.push_back({s.day, r, reqs[r], 0});
  }
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    if (a.day != b.day) return a.day < b.day;
    return a.pos < b.pos;
  });

  std::vector<OracleResult> out(reqs.size());
  SimWorld base = generate_world(cfg);
  RunHooks quiet;
  quiet.channel = channel;
  quiet.ab = ab;
  size_t j = 0;
  for (int day = 0; day < cfg.days && j < jobs.size(); ++day) {
    while (j < jobs.size() && jobs[j].day == day) {
      // all jobs for this day branch from the same snapshot
      size_t j0 = j;
      while (j < jobs.size() && jobs[j].day == day) ++j;
      for (size_t k = j0; k < j; ++k) {
        const Job& job = jobs[k];
        int end_day = std::min(cfg.days, base.st->launch_day[job.req.item] +
                                             cfg.new_item_window + 8);
        for (int force = 0; force < 2; ++force) {
          SimWorld twin = base;
          Intervention iv{job.req.session_id, job.req.item, force == 1};
          RunHooks h = quiet;
          h.intervention = &iv;
          run_day(twin, h);
          h.intervention = nullptr;
          while (twin.day < end_day) run_day(twin, h);
          double y = outcome_window_orders(twin, job.req.item);
          if (force == 1)
            out[job.pos].y_click = y;
          else
            out[job.pos].y_noclick = y;
        }
      }
    }
    run_day(base, quiet);
  }
  return out;
}

inline OracleResult counterfactual_uplift_oracle(const SimConfig& cfg,
                                                 const std::vector<SessionRec>& logs,
                                                 uint64_t session_id, uint32_t item,
                                                 const ChannelFn* channel = nullptr) {
  return uplift_oracle_batch(cfg, logs, {{session_id, item}}, channel).at(0);
}

// ---------------------------------------------------------------------------
// A/B bucket assignment.

struct BucketAssignment {
  AbMode mode = AbMode::kNone;
  int n_buckets = 2;
  std::vector<int> user_buckets;
  std::vector<int> item_buckets;  // only meaningful for item-coupled mode
};

inline BucketAssignment make_ab_buckets(const SimWorld& w, AbMode mode, int n_buckets) {
  GGR_CHECK(n_buckets >= 2, config_error("ab: need at least 2 buckets"));
  GGR_CHECK(n_buckets <= std::max(1, w.cfg.n_users),
            config_error("ab: more buckets than users"));
  BucketAssignment b;
  b.mode = mode;
  b.n_buckets = n_buckets;
  b.user_buckets.resize(w.cfg.n_users);
  for (int u = 0; u < w.cfg.n_users; ++u) b.user_buckets[u] = user_bucket(u, n_buckets);
  if (mode == AbMode::kItemCoupled) {
    b.item_buckets.resize(w.cfg.n_items);
    for (int i = 0; i < w.cfg.n_items; ++i) b.item_buckets[i] = item_bucket(i, n_buckets);
  }
  return b;
}

}  // namespace growthgr
