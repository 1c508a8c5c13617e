// SPDX-License-Identifier: Apache-2.0
//
// senselab - beamforming-feedback based angle-of-departure estimation
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "senselab/bff_codec.hpp"
#include "senselab/error.hpp"
#include "senselab/music.hpp"
#include "senselab/sim.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace senselab;
using test::Rng;

namespace
{

const double kLambda = kSpeedOfLight / 5.18e9;

double rel_diff(const ComplexMatrix &a, const ComplexMatrix &b)
{
    return frobenius_norm(a - b) / frobenius_norm(b);
}

SubcarrierGrid single_tone()
{
    SubcarrierGrid g;
    g.indices = {0};
    return g;
}

std::vector<DecodedFeedback> decode_all(std::span<const CsiSet> packets, AngleStep s)
{
    QuantizationConfig q;
    q.angle_step = s;
    std::vector<DecodedFeedback> out;
    for (const auto &p : packets)
        out.push_back(decode_bff(encode_bff(p, q)));
    return out;
}

double wrap_pi(double x) { return std::remainder(x, 2.0 * kPi); }

} // namespace

TEST(CovarianceFromBff, DiagonalExample)
{
    const std::vector<ComplexMatrix> v{ComplexMatrix::identity(3).left_cols(2)};
    const std::vector<double> gains{4.0, 1.0};
    const auto c = covariance_from_bff(v, gains);
    EXPECT_LE(frobenius_norm(c.matrix() - test::diag_real({4.0, 1.0, 0.0})), 1e-15);
}

TEST(CovarianceFromBff, FlatChannelEqualsCsiCovariance)
{
    Rng rng(51);
    const auto csi = test::flat_gain_csi(rng, 4, 4, 52, {3.0, 1.5, 0.7, 0.2});
    const auto dec = decode_bff(encode_bff(csi, QuantizationConfig{AngleStep::none}));
    EXPECT_LE(rel_diff(covariance_from_bff(dec).matrix(), covariance_from_csi(csi).matrix()), 1e-9);
}

TEST(CovarianceFromBff, CalibrationCancelsInjectedPhases)
{
    Rng rng(52);
    const std::size_t k = 5;
    std::vector<ComplexMatrix> v, shifted;
    std::vector<std::vector<double>> args;
    for (std::size_t s = 0; s < k; ++s)
    {
        v.push_back(test::random_orthonormal(rng, 3, 2));
        std::vector<double> tau{0.0, std::uniform_real_distribution<double>(-kPi, kPi)(rng),
                                std::uniform_real_distribution<double>(-kPi, kPi)(rng)};
        std::vector<cplx> d;
        for (double t : tau)
            d.push_back(std::polar(1.0, -t));
        shifted.push_back(ComplexMatrix::diagonal(std::span<const cplx>(d)) * v.back());
        args.push_back(tau);
    }
    const std::vector<double> gains{2.0, 0.5};
    const auto cal = Calibration::from_arguments(args);
    EXPECT_LE(rel_diff(covariance_from_bff(shifted, gains, &cal).matrix(), covariance_from_bff(v, gains).matrix()),
              1e-12);
}

TEST(CovarianceFromBff, ShapeErrors)
{
    const std::vector<ComplexMatrix> v{ComplexMatrix::identity(3).left_cols(2)};
    EXPECT_THROW(covariance_from_bff(v, std::vector<double>{1.0}), InputError);
    const auto cal = Calibration::identity(1, 4);
    EXPECT_THROW(covariance_from_bff(v, std::vector<double>{1.0, 1.0}, &cal), InputError);
}

TEST(CovarianceFromCsi, RankOneExample)
{
    Rng rng(53);
    const auto a = test::random_matrix(rng, 3, 1);
    const auto b = test::random_matrix(rng, 4, 1);
    CsiSet csi;
    csi.grid = single_tone();
    csi.h = {a * b.adjoint()};
    const auto expected = frobenius_norm_sq(a) * (b * b.adjoint());
    EXPECT_LE(rel_diff(covariance_from_csi(csi).matrix(), expected), 1e-12);
}

TEST(CovarianceFromCsi, FullModeIsSumOfRowCovariances)
{
    Rng rng(54);
    CsiSet csi;
    csi.grid.indices = {1, 2, 3};
    for (int k = 0; k < 3; ++k)
        csi.h.push_back(test::random_matrix(rng, 3, 4));
    ComplexMatrix sum(4, 4);
    for (std::size_t r = 0; r < 3; ++r)
    {
        CsiSet row = csi;
        for (auto &h : row.h)
            h = h.block(r, 0, 1, 4);
        sum += covariance_from_csi(row, CsiCovarianceMode::first_row).matrix();
    }
    EXPECT_LE(rel_diff(covariance_from_csi(csi).matrix(), sum), 1e-12);
    CsiSet first = csi;
    for (auto &h : first.h)
        h = h.block(0, 0, 1, 4);
    EXPECT_LE(rel_diff(covariance_from_csi(csi, CsiCovarianceMode::first_row).matrix(),
                       covariance_from_csi(first).matrix()),
              1e-12);
}

TEST(CovarianceFromCsi, TwoPathSceneHasRankTwo)
{
    const auto scene = Scene::evaluation_layout(2);
    const auto csi = synthesize_csi(two_path_scene(scene), scene.ap_array, scene.sta_array,
                                    SubcarrierGrid::legacy_20mhz());
    const auto e = hermitian_eig(covariance_from_csi(csi).matrix()).eigenvalues;
    // Two paths; beam squint across the band leaves only a tiny third mode.
    EXPECT_GT(e[2], 1e-3 * e[3]);
    EXPECT_LE(e[1], 1e-6 * e[3]);
}

TEST(AverageCovariances, Examples)
{
    const std::vector<Covariance> two{Covariance(test::diag_real({2.0, 0.0})),
                                      Covariance(test::diag_real({0.0, 2.0}))};
    EXPECT_LE(frobenius_norm(average_covariances(two).matrix() - ComplexMatrix::identity(2)), 1e-15);
    Rng rng(55);
    const auto x = test::random_matrix(rng, 3, 3);
    const std::vector<Covariance> same(4, Covariance(x * x.adjoint()));
    EXPECT_LE(rel_diff(average_covariances(same).matrix(), same[0].matrix()), 1e-15);
    EXPECT_THROW(average_covariances(std::vector<Covariance>{}), InputError);
    EXPECT_THROW(average_covariances(std::vector<Covariance>{same[0], two[0]}), InputError);
}

TEST(AverageCovariances, MeanOfPsdIsPsd)
{
    Rng rng(56);
    std::vector<Covariance> covs;
    for (int i = 0; i < 10; ++i)
    {
        const auto x = test::random_matrix(rng, 4, 2);
        covs.emplace_back(x * x.adjoint());
    }
    const auto e = hermitian_eig(average_covariances(covs).matrix()).eigenvalues;
    EXPECT_GE(e.front(), -1e-9 * e.back());
}

TEST(SpatialSmooth, Examples)
{
    const Covariance c(test::diag_real({1.0, 2.0, 3.0}));
    EXPECT_LE(frobenius_norm(spatial_smooth(c, 3).matrix() - c.matrix()), 0.0);
    EXPECT_LE(frobenius_norm(spatial_smooth(c, 2).matrix() - test::diag_real({1.5, 2.5})), 1e-15);
    EXPECT_THROW(spatial_smooth(c, 1), InputError);
    EXPECT_THROW(spatial_smooth(c, 4), InputError);
}

TEST(SpatialSmooth, DecoheresPhaseLockedPaths)
{
    // Same AoA, same per-subcarrier gains: rank-1 covariance before smoothing.
    const PathSet paths{Path{-20.0, 10.0, 1.0, 0.0}, Path{35.0, 10.0, 0.8, 0.0}};
    const ArrayGeometry g{4, 0.025};
    const auto csi = synthesize_csi(paths, g, g, single_tone());
    const auto c = covariance_from_csi(csi);
    const auto e = hermitian_eig(c.matrix()).eigenvalues;
    EXPECT_LE(e[2], 1e-12 * e[3]);
    const auto s = hermitian_eig(spatial_smooth(c, 3).matrix()).eigenvalues;
    EXPECT_GE(s[1], 1e-3 * s[2]);
}

TEST(NoiseSubspace, Examples)
{
    const auto e = noise_subspace(Covariance(test::diag_real({5.0, 1e-12})), 1);
    ASSERT_EQ(e.cols(), 1u);
    EXPECT_NEAR(std::abs(e(0, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(e(1, 0)), 1.0, 1e-15);

    const ArrayGeometry g{4, 0.025};
    const auto a = steering_vector(23.0, g, kLambda);
    const auto col = ComplexMatrix::column(a);
    const auto en = noise_subspace(Covariance(col * col.adjoint()), 1);
    EXPECT_EQ(en.cols(), 3u);
    for (std::size_t c = 0; c < 3; ++c)
        EXPECT_LE(std::abs(dot(en.col(c), a)), 1e-8);

    Rng rng(57);
    const auto x = test::random_matrix(rng, 4, 4);
    const auto one = noise_subspace(Covariance(x * x.adjoint()), 3);
    ASSERT_EQ(one.cols(), 1u);
    EXPECT_NEAR(vector_norm(one.col(0)), 1.0, 1e-12);

    try
    {
        noise_subspace(Covariance(ComplexMatrix::identity(2)), 2);
        FAIL() << "expected ConfigError";
    }
    catch (const ConfigError &err)
    {
        EXPECT_NE(std::string(err.what()).find("insufficient subarray size for L paths"), std::string::npos);
    }
}

TEST(MusicSpectrum, EmptyBasisGivesZeroQuadform)
{
    const auto grid = angle_grid(1.0);
    const auto s = music_spectrum(std::span<const std::vector<cplx>>{}, 3, 0.025, kLambda, grid);
    for (double q : s.quadform)
        EXPECT_EQ(q, 0.0);
    EXPECT_TRUE(std::isinf(s.g[10]));
}

TEST(MusicSpectrum, SinglePathMinimumAndBounds)
{
    const ArrayGeometry g{4, 0.025};
    const double truth = 31.37;
    const auto a = ComplexMatrix::column(steering_vector(truth, g, kLambda));
    const auto en = noise_subspace(Covariance(a * a.adjoint()), 1);
    const auto grid = angle_grid(0.5);
    const auto s = music_spectrum(en, 0.025, kLambda, grid);
    const auto it = std::min_element(s.quadform.begin(), s.quadform.end());
    EXPECT_NEAR(s.angles_deg[std::size_t(it - s.quadform.begin())], 31.5, 1e-9);
    for (std::size_t i = 0; i < grid.size(); ++i)
    {
        EXPECT_GE(s.quadform[i], 0.0);
        EXPECT_LE(s.quadform[i], 4.0 * 3.0 + 1e-9);
        if (s.quadform[i] > 0)
        {
            EXPECT_DOUBLE_EQ(s.g[i], 1.0 / s.quadform[i]);
        }
    }
}

TEST(MusicSpectrum, GridRules)
{
    EXPECT_EQ(angle_grid(1.0).size(), 181u);
    EXPECT_DOUBLE_EQ(angle_grid(1.0).front(), -90.0);
    EXPECT_DOUBLE_EQ(angle_grid(1.0).back(), 90.0);
    EXPECT_EQ(angle_grid(0.02).size(), 9001u);
    const auto e = ComplexMatrix::identity(3).left_cols(1);
    EXPECT_THROW(music_spectrum(e, 0.025, kLambda, std::vector<double>{1.0, 0.0}), InputError);
    EXPECT_THROW(music_spectrum(e, 0.025, kLambda, std::vector<double>{}), InputError);
    EXPECT_THROW(angle_grid(0.0), InputError);
}

TEST(FindPeaks, ConstructedDips)
{
    MusicSpectrum s;
    s.angles_deg = angle_grid(0.1);
    for (double x : s.angles_deg)
    {
        const double q = 1.0 - 0.9 * std::exp(-std::pow((x + 20.0) / 3.0, 2)) -
                         0.8 * std::exp(-std::pow((x - 35.0) / 3.0, 2));
        s.quadform.push_back(q);
        s.g.push_back(1.0 / q);
    }
    const auto est = find_peaks(s, 2);
    ASSERT_EQ(est.angles_deg.size(), 2u);
    EXPECT_NEAR(est.angles_deg[0], -20.0, 0.1);
    EXPECT_NEAR(est.angles_deg[1], 35.0, 0.1);
}

TEST(FindPeaks, RefinementIsExactForLogParabola)
{
    MusicSpectrum s;
    for (double x = -5.0; x <= 5.0 + 1e-9; x += 1.0)
    {
        s.angles_deg.push_back(x);
        s.quadform.push_back(std::exp((x - 0.3) * (x - 0.3)));
        s.g.push_back(1.0 / s.quadform.back());
    }
    EXPECT_NEAR(find_peaks(s, 1).angles_deg[0], 0.3, 1e-12);
}

TEST(FindPeaks, BoundaryMinimumIsDeficit)
{
    MusicSpectrum s;
    for (int i = 0; i < 20; ++i)
    {
        s.angles_deg.push_back(i);
        s.quadform.push_back(1.0 + i);
        s.g.push_back(1.0 / (1.0 + i));
    }
    try
    {
        find_peaks(s, 1);
        FAIL() << "expected PeakDeficit";
    }
    catch (const PeakDeficit &e)
    {
        EXPECT_TRUE(e.found().empty());
    }
}

TEST(Calibration, ZeroOffsetsGiveIdentity)
{
    const ArrayGeometry g{4, 0.025};
    const auto csi = synthesize_csi({Path{0.0, 12.0, 1.0, 0.0}}, g, g, SubcarrierGrid::legacy_20mhz());
    const std::vector<CsiSet> packets{csi};
    const auto cal = estimate_calibration(std::span<const CsiSet>(packets), 0.0, g, kLambda);
    ASSERT_EQ(cal.subcarriers(), 52u);
    for (const auto &row : cal.w)
        for (const auto &z : row)
            EXPECT_NEAR(std::abs(z - cplx(1.0, 0.0)), 0.0, 1e-8);
}

TEST(Calibration, RecoversInjectedOffsets)
{
    const ArrayGeometry ap{3, 0.025}, sta{4, 0.025};
    const double aod = 17.0;
    const auto grid = SubcarrierGrid::legacy_20mhz();
    const std::vector<double> tau{0.0, deg2rad(40.0), deg2rad(-70.0)};
    const auto clean = synthesize_csi({Path{aod, -5.0, 0.2, 0.0}}, ap, sta, grid);
    const std::vector<CsiSet> packets{apply_tx_phase_offsets(clean, tau)};

    std::vector<double> wavelengths;
    for (std::size_t k = 0; k < grid.size(); ++k)
        wavelengths.push_back(grid.wavelength(k));

    const auto from_csi = estimate_calibration(std::span<const CsiSet>(packets), aod, ap);
    const auto decoded = decode_all(packets, AngleStep::none);
    const auto from_bff = estimate_calibration(std::span<const DecodedFeedback>(decoded), aod, ap, wavelengths);
    for (const auto *cal : {&from_csi, &from_bff})
    {
        const auto args = cal->arguments();
        for (const auto &row : args)
            for (std::size_t n = 0; n < 3; ++n)
                EXPECT_LE(std::abs(wrap_pi(row[n] - tau[n])), 1e-6);
    }

    // Applying the estimate restores the offset-free covariance.
    const auto clean_dec = decode_all(std::vector<CsiSet>{clean}, AngleStep::none);
    EXPECT_LE(rel_diff(covariance_from_bff(decoded[0], &from_bff).matrix(),
                       covariance_from_bff(clean_dec[0]).matrix()),
              1e-6);
    EXPECT_LE(rel_diff(covariance_from_csi(packets[0], CsiCovarianceMode::full, &from_csi).matrix(),
                       covariance_from_csi(clean).matrix()),
              1e-6);
}

TEST(Calibration, DegenerateFirstEntry)
{
    CsiSet csi;
    csi.grid = single_tone();
    csi.h = {ComplexMatrix{{0.0, 1.0, 1.0}, {0.0, 1.0, -1.0}}};
    const std::vector<CsiSet> packets{csi};
    EXPECT_THROW(estimate_calibration(std::span<const CsiSet>(packets), 0.0, ArrayGeometry{3, 0.025}, kLambda),
                 NumericalError);
}

TEST(Calibration, Invariants)
{
    EXPECT_THROW(Calibration::from_arguments({{0.0, 1.0}, {0.0}}), InputError);
    const auto c = Calibration::from_arguments({{0.0, 1.0, -2.0}});
    EXPECT_NO_THROW(c.validate());
    EXPECT_NEAR(c.arguments()[0][2], -2.0, 1e-15);
}

TEST(EstimateAod, LosslessBffMatchesCsi)
{
    Rng rng(58);
    MusicParams p;
    p.paths = 2;
    p.subarray_size = 3;
    p.packets = 3;
    std::vector<CsiSet> packets;
    for (int i = 0; i < 3; ++i)
        packets.push_back(test::flat_gain_steered_csi(rng, 4, {4, 0.025}, {-20.0, 35.0}, {2.0, 1.0, 0.05, 0.02}));
    const auto dec = decode_all(packets, AngleStep::none);
    const auto a = estimate_aod(std::span<const CsiSet>(packets), p);
    const auto b = estimate_aod(std::span<const DecodedFeedback>(dec), p);
    ASSERT_EQ(a.angles_deg.size(), b.angles_deg.size());
    for (std::size_t i = 0; i < a.angles_deg.size(); ++i)
        EXPECT_NEAR(a.angles_deg[i], b.angles_deg[i], 1e-6);
}

TEST(EstimateAod, SinglePathMonteCarlo)
{
    const ArrayGeometry g{3, 0.025};
    const auto truth = synthesize_csi({Path{15.0, -10.0, 1.0, 0.0}}, g, g, SubcarrierGrid::legacy_20mhz());
    MusicParams p;
    p.paths = 1;
    p.subarray_size = 2;
    p.packets = 10;
    p.grid_step_deg = 0.05;
    std::vector<double> errs;
    for (std::uint64_t t = 0; t < 100; ++t)
    {
        const auto packets = noisy_packets(truth, 20.0, 10, derive_seed(77, t));
        errs.push_back(std::abs(estimate_aod(std::span<const CsiSet>(packets), p).angles_deg[0] - 15.0));
    }
    std::nth_element(errs.begin(), errs.begin() + 50, errs.end());
    EXPECT_LE(errs[50], 1.0);
}

TEST(EstimateAod, NoiselessSinglePathWithinGridStep)
{
    const ArrayGeometry g{4, 0.025};
    const std::vector<CsiSet> packets{
        synthesize_csi({Path{-42.3, 7.0, 1.0, 0.0}}, g, g, single_tone())};
    MusicParams p;
    p.paths = 1;
    p.subarray_size = 2;
    p.packets = 1;
    EXPECT_NEAR(estimate_aod(std::span<const CsiSet>(packets), p).angles_deg[0], -42.3, 0.02);
}

TEST(EstimateAod, NoiselessOrthogonalityAtTrueAods)
{
    const ArrayGeometry g{4, 0.025};
    const std::vector<double> aods{-33.0, 12.5};
    const auto csi = synthesize_csi({Path{aods[0], 20.0, 1.0, 0.0}, Path{aods[1], -40.0, 0.5, 1.3}}, g, g,
                                    single_tone());
    const auto c = spatial_smooth(covariance_from_csi(csi), 3);
    const auto en = noise_subspace(c, 2);
    const auto s = music_spectrum(en, 0.025, kLambda, angle_grid(0.02));
    std::vector<double> q = s.quadform;
    std::nth_element(q.begin(), q.begin() + q.size() / 2, q.end());
    const double median = q[q.size() / 2];
    const auto at = music_spectrum(en, 0.025, kLambda, aods);
    for (double v : at.quadform)
        EXPECT_LE(v, 1e-6 * median);
}

TEST(EstimateAod, Preconditions)
{
    MusicParams p;
    p.paths = 2;
    p.subarray_size = 2;
    EXPECT_THROW(p.validate(), ConfigError);
    p.subarray_size = 3;
    p.packets = 4;
    const std::vector<CsiSet> too_few(2, synthesize_csi({Path{}}, ArrayGeometry{}, ArrayGeometry{}, single_tone()));
    EXPECT_THROW(estimate_aod(std::span<const CsiSet>(too_few), p), InputError);
}

TEST(MusicParams, SubarrayCountInterpretation)
{
    MusicParams p;
    p.subarray_mode = SubarrayMode::count;
    p.subarray_size = 2;
    EXPECT_EQ(p.block_size(4), 3u);
    p.subarray_mode = SubarrayMode::size;
    EXPECT_EQ(p.block_size(4), 2u);
}
