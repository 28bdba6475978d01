// Regenerates everything under fixtures/ deterministically.
//   fixture_gen <output_root>

#include <preftrade/market_data.hpp>

#include <cstdio>
#include <string>
#include <vector>

using namespace preftrade;

namespace {

void write(const std::string& path, const std::string& content) {
    atomic_write_file(path, content, "fixture-gen");
    std::printf("wrote %s\n", path.c_str());
}

// The nine regime windows the backtest CLI runs out of the box.
void gen_test_periods(const std::string& dir) {
    std::vector<RegimeWindow> rows = {
        {Asset::Btc, RegimeLabel::Bear, *parse_day("2025-04-08"), *parse_day("2025-05-23"),
         79163.24, 107318.30},
        {Asset::Btc, RegimeLabel::Sideways, *parse_day("2025-03-10"), *parse_day("2025-04-06"),
         80734.48, 78430.00},
        {Asset::Btc, RegimeLabel::Bull, *parse_day("2025-01-30"), *parse_day("2025-02-28"),
         103733.25, 84349.94},
        {Asset::Eth, RegimeLabel::Bear, *parse_day("2025-01-07"), *parse_day("2025-03-11"),
         3687.44, 1923.43},
        {Asset::Eth, RegimeLabel::Sideways, *parse_day("2025-05-29"), *parse_day("2025-06-11"),
         2681.61, 2771.61},
        {Asset::Eth, RegimeLabel::Bull, *parse_day("2025-04-08"), *parse_day("2025-05-07"),
         1553.04, 1811.11},
        {Asset::Sol, RegimeLabel::Bear, *parse_day("2025-01-26"), *parse_day("2025-02-27"),
         256.40, 137.68},
        {Asset::Sol, RegimeLabel::Sideways, *parse_day("2025-03-11"), *parse_day("2025-04-06"),
         118.32, 105.91},
        {Asset::Sol, RegimeLabel::Bull, *parse_day("2025-04-08"), *parse_day("2025-05-14"),
         106.98, 176.64},
    };
    write(dir + "/regimes.csv", serialize_regimes(rows));
}

OnChainDaily onchain_row(Asset a, Day d, RngStream& rng) {
    OnChainDaily r;
    r.asset = a;
    r.date = d;
    r.tx_count = 200000 + std::int64_t(rng.below(800000));
    r.active_wallets = 100000 + std::int64_t(rng.below(900000));
    r.value_transferred_usd = 1e9 * (0.5 + rng.uniform());
    r.gas_price_mean_gwei = a == Asset::Eth ? 20.0 + 30.0 * rng.uniform() : 2.0 * rng.uniform();
    r.gas_price_median_gwei = r.gas_price_mean_gwei * (0.7 + 0.2 * rng.uniform());
    r.gas_consumed = a == Asset::Btc ? 0.0 : 1e10 * rng.uniform();
    return r;
}

// Hand-traceable three-day ledger: flat intraday bars, pinned closes, one
// scripted buy and one scripted liquidation.
void gen_golden3(const std::string& dir) {
    const double closes[3][3] = {{100.0, 50.0, 10.0}, {110.0, 45.0, 12.0}, {105.0, 50.0, 11.0}};
    std::vector<Candle> candles;
    std::vector<OnChainDaily> chain;
    std::vector<SentimentSnapshot> sentiment;
    RngStream rng(stream_seed(2025, "fixture.golden3"));
    Day d0 = *parse_day("2025-01-01");
    for (int t = 0; t < 3; ++t) {
        Day d = Day{d0.value + t};
        for (Asset a : kAssets) {
            double c = closes[t][int(a)];
            Candle k;
            k.asset = a;
            k.date = d;
            k.open = k.high = k.low = k.close = c;
            k.volume = 1e9;
            k.market_cap = c * 2e7;
            candles.push_back(k);
            chain.push_back(onchain_row(a, d, rng));
        }
        sentiment.push_back({d, {0.5, -0.25, 0.1, 0.3}});
    }
    write(dir + "/candles.csv", serialize_candles(candles));
    write(dir + "/onchain.csv", serialize_onchain(chain));
    write(dir + "/sentiment.csv", serialize_sentiment(sentiment));

    NewsArticle a;
    a.id = "g1";
    a.timestamp = *parse_instant("2025-01-01T08:00:00Z");
    a.publisher = "wire";
    a.url = "https://news.example/g1";
    a.headline = "markets open the year quietly";
    a.body = "thin volumes and tight ranges across the majors to start the session";
    a.simhash = simhash64(a.headline + " " + a.body);
    write(dir + "/news.jsonl", serialize_news({a}));

    write(dir + "/alphas.csv", "date,alpha\n2025-01-02,0.5\n2025-01-03,-1\n");

    std::vector<RegimeWindow> windows = {
        {Asset::Btc, RegimeLabel::Sideways, d0, Day{d0.value + 2}, 100.0, 105.0}};
    write(dir + "/regimes.csv", serialize_regimes(windows));
}

const char* kWords[] = {"liquidity", "order",  "flow",     "basis",   "funding", "perp",
                        "spot",      "onchain", "wallets",  "miners",  "hashrate", "staking",
                        "rollup",    "bridge",  "custody",  "etf",     "inflows", "outflows",
                        "leverage",  "margin",  "futures",  "options", "gamma",   "volatility",
                        "spread",    "maker",   "taker",    "venue",   "depth",   "slippage",
                        "rally",     "selloff", "breakout", "support", "resistance", "consolidation"};
constexpr int kNumWords = int(sizeof(kWords) / sizeof(kWords[0]));

std::string sentence(RngStream& rng, int n_words) {
    std::string s;
    for (int i = 0; i < n_words; ++i) {
        if (i) s += ' ';
        s += kWords[rng.below(kNumWords)];
    }
    return s;
}

// Thirty days of jagged +/-3-5% moves with a news stream that contains
// deliberate near-duplicates every fifth day.
void gen_synth30(const std::string& dir) {
    RngStream rng(stream_seed(2025, "fixture.synth30"));
    Day d0 = *parse_day("2025-01-01");
    const int n_days = 30;
    double px[3] = {100000.0, 3000.0, 150.0};

    std::vector<Candle> candles;
    std::vector<OnChainDaily> chain;
    std::vector<SentimentSnapshot> sentiment;
    std::vector<NewsArticle> news;
    std::vector<double> btc_close(n_days), eth_close(n_days), sol_close(n_days);

    for (int t = 0; t < n_days; ++t) {
        Day d = Day{d0.value + t};
        for (Asset a : kAssets) {
            int i = int(a);
            double open = px[i];
            double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            double move = sign * (0.03 + 0.02 * rng.uniform());
            double close = open * (1.0 + move);
            Candle k;
            k.asset = a;
            k.date = d;
            k.open = open;
            k.close = close;
            k.high = std::max(open, close) * (1.0 + 0.005 * rng.uniform());
            k.low = std::min(open, close) * (1.0 - 0.005 * rng.uniform());
            k.volume = 2e8 * (0.5 + rng.uniform());
            k.market_cap = close * 1.9e7;
            candles.push_back(k);
            chain.push_back(onchain_row(a, d, rng));
            px[i] = close;
            (i == 0 ? btc_close : i == 1 ? eth_close : sol_close)[std::size_t(t)] = close;
        }
        SentimentSnapshot s;
        s.date = d;
        for (int k = 0; k < 8; ++k) s.vector.push_back(2.0 * rng.uniform() - 1.0);
        sentiment.push_back(std::move(s));

        for (int k = 0; k < 3; ++k) {
            NewsArticle a;
            a.id = format_day(d) + "-n" + std::to_string(k);
            a.timestamp = start_of_day(d) + 3600 * (8 + 4 * k);
            a.publisher = k == 0 ? "wire" : k == 1 ? "desk" : "blog";
            a.url = "https://news.example/" + a.id;
            a.headline = sentence(rng, 4);
            a.body = sentence(rng, 150);
            a.simhash = simhash64(a.headline + " " + a.body);
            news.push_back(a);
            if (k == 1 && t % 5 == 0) {
                // echo of the noon story: same text, one word swapped, later ts
                NewsArticle dup = a;
                dup.id = a.id + "-echo";
                dup.timestamp = a.timestamp + 1800;
                dup.publisher = "mirror";
                dup.url = "https://news.example/" + dup.id;
                auto pos = dup.body.find(' ');
                dup.body = "reportedly" + dup.body.substr(pos);
                dup.simhash = simhash64(dup.headline + " " + dup.body);
                news.push_back(dup);
            }
        }
    }

    write(dir + "/candles.csv", serialize_candles(candles));
    write(dir + "/onchain.csv", serialize_onchain(chain));
    write(dir + "/sentiment.csv", serialize_sentiment(sentiment));
    write(dir + "/news.jsonl", serialize_news(news));

    std::vector<RegimeWindow> windows = {
        {Asset::Btc, RegimeLabel::Bull, Day{d0.value + 1}, Day{d0.value + 14}, btc_close[1],
         btc_close[14]},
        {Asset::Eth, RegimeLabel::Sideways, Day{d0.value + 4}, Day{d0.value + 19}, eth_close[4],
         eth_close[19]},
        {Asset::Sol, RegimeLabel::Bear, Day{d0.value + 9}, Day{d0.value + 27}, sol_close[9],
         sol_close[27]},
        {Asset::Btc, RegimeLabel::Sideways, Day{d0.value + 2}, Day{d0.value + 28}, btc_close[2],
         btc_close[28]},
    };
    write(dir + "/regimes.csv", serialize_regimes(windows));
}

// Forty days of a clean +3%/day grind; sentiment points the same way every
// day so an aligned rationale is unambiguously the better signal.
void gen_planted(const std::string& dir) {
    RngStream rng(stream_seed(2025, "fixture.planted"));
    Day d0 = *parse_day("2025-02-01");
    const int n_days = 40;
    double px[3] = {50000.0, 2000.0, 100.0};

    std::vector<Candle> candles;
    std::vector<OnChainDaily> chain;
    std::vector<SentimentSnapshot> sentiment;
    for (int t = 0; t < n_days; ++t) {
        Day d = Day{d0.value + t};
        for (Asset a : kAssets) {
            int i = int(a);
            double open = px[i];
            double close = open * 1.03;
            Candle k;
            k.asset = a;
            k.date = d;
            k.open = open;
            k.low = open;
            k.high = close;
            k.close = close;
            k.volume = 1e9;
            k.market_cap = close * 2e7;
            candles.push_back(k);
            chain.push_back(onchain_row(a, d, rng));
            px[i] = close;
        }
        sentiment.push_back({d, {0.6, 0.6, 0.6, 0.6, 0.6, 0.6}});
    }
    write(dir + "/candles.csv", serialize_candles(candles));
    write(dir + "/onchain.csv", serialize_onchain(chain));
    write(dir + "/sentiment.csv", serialize_sentiment(sentiment));

    NewsArticle a;
    a.id = "p1";
    a.timestamp = *parse_instant("2025-02-01T09:00:00Z");
    a.publisher = "wire";
    a.url = "https://news.example/p1";
    a.headline = "steady climb continues";
    a.body = "every major closes higher again as the grind persists";
    a.simhash = simhash64(a.headline + " " + a.body);
    write(dir + "/news.jsonl", serialize_news({a}));
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: fixture_gen <output_root>\n");
        return 2;
    }
    std::string root = argv[1];
    try {
        gen_test_periods(root + "/test_periods");
        gen_golden3(root + "/golden3");
        gen_synth30(root + "/synth30");
        gen_planted(root + "/planted");
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
