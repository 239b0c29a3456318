#include <gtest/gtest.h>

#include <sstream>

#include "orca/features.hpp"
#include "orca/synthetic.hpp"

using namespace orca;

namespace {

const PricePanel& small_panel() {
    static const PricePanel p = synthetic_panel({.symbols = {"SPY", "QQQ", "IWM", "EFA", "GLD", "IEF", "UUP", "XLE"},
                                                 .days = 420,
                                                 .event_spacing = 100,
                                                 .burn_in = 150,
                                                 .seed = 21});
    return p;
}

const FeatureMatrix& small_features() {
    static const FeatureMatrix fm = build_features(small_panel());
    return fm;
}

}  // namespace

TEST(Features, FamilyCounts) {
    const auto& m = small_features().manifest;
    EXPECT_EQ(m.count(FeatureFamily::Eigen), 39u);
    EXPECT_EQ(m.count(FeatureFamily::Eigenvector), 12u);
    EXPECT_EQ(m.count(FeatureFamily::Topology), 63u);
    EXPECT_EQ(m.count(FeatureFamily::Aggregate), 21u);
    EXPECT_EQ(m.count(FeatureFamily::Dynamics), 88u);
    EXPECT_EQ(m.count(FeatureFamily::Traditional), 27u);
    EXPECT_EQ(m.size(), 250u);
    EXPECT_EQ(m.columns(FeatureSubset::Spectral).size(), 223u);
    EXPECT_EQ(m.columns(FeatureSubset::Traditional).size(), 27u);
}

TEST(Features, RowsStartAfterWarmup) {
    const auto& fm = small_features();
    EXPECT_EQ(feature_warmup(FeatureOptions{}), 120u);
    ASSERT_EQ(fm.size(), 420u - 120u);
    EXPECT_EQ(fm.rows.front(), 120u);
    EXPECT_EQ(fm.dates.front(), small_panel().dates()[120]);
    EXPECT_EQ(fm.position_of_row(200), 80u);
    EXPECT_EQ(fm.position_of_row(119), FeatureMatrix::npos);
    EXPECT_TRUE(fm.values.allFinite());
}

TEST(Features, ParallelBuildIsIdentical) {
    FeatureOptions o;
    o.jobs = 3;
    const auto fm = build_features(small_panel(), o);
    EXPECT_EQ(fm.values, small_features().values);
    EXPECT_EQ(fm.manifest.version, small_features().manifest.version);
}

TEST(Features, PrefixOfPanelGivesSameRows) {
    const auto prefix = build_features(small_panel().slice(0, 300));
    const auto& full = small_features();
    ASSERT_EQ(prefix.size(), 180u);
    EXPECT_EQ(prefix.values, full.values.topRows(180));
    const auto capped = build_features(small_panel(), {}, 300);
    EXPECT_EQ(capped.values, prefix.values);
}

TEST(Features, SubsetSelection) {
    const auto& fm = small_features();
    const auto spectral = fm.select(FeatureSubset::Spectral);
    for (const auto& e : spectral.manifest.entries) EXPECT_NE(e.family, FeatureFamily::Traditional);
    const auto trad = fm.select(FeatureSubset::Traditional);
    ASSERT_EQ(trad.values.cols(), 27);
    EXPECT_EQ(trad.values.col(0), fm.values.col(223));
    EXPECT_EQ(trad.manifest.entries.front().name, "ret_1d");
    EXPECT_NE(trad.manifest.version, fm.manifest.version);
}

TEST(Features, CsvAndManifestRoundTrip) {
    const auto& fm = small_features();
    std::stringstream csv, man;
    write_features_csv(csv, fm, {"test"});
    fm.manifest.write(man);
    const auto m2 = FeatureManifest::read(man);
    EXPECT_EQ(m2.entries, fm.manifest.entries);
    EXPECT_EQ(m2.version, fm.manifest.version);
    const auto back = read_features_csv(csv, m2);
    EXPECT_EQ(back.values, fm.values);
    EXPECT_EQ(back.rows, fm.rows);
    EXPECT_EQ(back.dates, fm.dates);
}

TEST(Features, ManifestTamperingIsDetected) {
    std::stringstream man;
    small_features().manifest.write(man);
    std::string text = man.str();
    text.replace(text.find("roll60.ar1\t"), 10, "roll60.ar9");
    std::istringstream in(text);
    EXPECT_THROW(FeatureManifest::read(in), DataError);

    std::istringstream csv("date,row,a,b\n2020-01-01,5,1,2\n");
    FeatureManifest other;
    other.entries = {{"a", FeatureFamily::Eigen, "roll60"}, {"c", FeatureFamily::Eigen, "roll60"}};
    EXPECT_THROW(read_features_csv(csv, other), DataError);
}

TEST(Features, AssembleSpectralRowIsDeterministic) {
    const auto& p = small_panel();
    std::array<CorrelationSnapshot, 3> snaps = {estimate(p, 300, Estimator::Roll60), estimate(p, 300, Estimator::Roll120),
                                                estimate(p, 300, Estimator::Ewm30)};
    DynamicsState s1, s2;
    const auto a = assemble_spectral_row(snaps, s1);
    const auto b = assemble_spectral_row(snaps, s2);
    EXPECT_EQ(a.values.values, b.values.values);
    EXPECT_EQ(a.values.size(), 45u * 3 + 88u);
    snaps[1] = estimate(p, 301, Estimator::Roll120);
    EXPECT_THROW(assemble_spectral_row(snaps, s1), DataError);
}

TEST(Features, ParseSubset) {
    EXPECT_EQ(parse_subset("spectral"), FeatureSubset::Spectral);
    EXPECT_THROW(parse_subset("all"), ConfigError);
    EXPECT_TRUE(in_subset(FeatureFamily::Dynamics, FeatureSubset::Spectral));
    EXPECT_FALSE(in_subset(FeatureFamily::Traditional, FeatureSubset::Spectral));
}
