#include <gtest/gtest.h>

#include "linkring/config.hpp"
#include "linkring/device.hpp"
#include "test_util.hpp"

using namespace linkring;
using testutil::kind_of;

namespace {

const DeviceConfig kCfg{};
const DeviceCalibration kCal = calibrate(FingerProfile{}, kCfg);

}  // namespace

TEST(Calibrate, ReferenceFinger) {
  EXPECT_DOUBLE_EQ(kCal.contact_depth, 22.0);
  EXPECT_DOUBLE_EQ(kCal.lateral_range, 8.0);
  EXPECT_DOUBLE_EQ(kCal.press_depth_max, 2.0);
}

TEST(Calibrate, LateralRangeBoundedByWorkspace) {
  const FingerProfile wide{15.0, 200.0};
  const auto cal = calibrate(wide, kCfg);
  EXPECT_LT(cal.lateral_range, 100.0);
  for (double depth : {cal.contact_depth - kCfg.hover_gap, cal.contact_depth, cal.contact_depth + 2.0})
    EXPECT_LE(cal.lateral_range, reachable_half_span(kCfg.linkage_a, depth) - kCfg.lateral_margin + 1e-12);
}

TEST(Calibrate, ZeroThicknessPlacesContactAtStandoff) {
  EXPECT_DOUBLE_EQ(contact_depth({0.0, 16.0}, kCfg), kCfg.standoff);
  // 14.5 mm lies inside the inner annulus, so no symmetric pose exists there.
  EXPECT_EQ(kind_of([] { calibrate({0.0, 16.0}, kCfg); }), ErrorKind::OutOfRange);
}

TEST(Calibrate, ThickFingerHasNoContactPose) {
  EXPECT_EQ(kind_of([] { calibrate({80.0, 16.0}, kCfg); }), ErrorKind::OutOfRange);
  EXPECT_EQ(kind_of([] { calibrate({-1.0, 16.0}, kCfg); }), ErrorKind::OutOfRange);
  EXPECT_EQ(kind_of([] { calibrate({15.0, 0.0}, kCfg); }), ErrorKind::OutOfRange);
}

TEST(Calibrate, DepthMonotoneInThickness) {
  double prev = -1.0;
  for (double t = 14.0; t <= 30.0; t += 0.5) {
    const auto cal = calibrate({t, 16.0}, kCfg);
    EXPECT_GE(cal.contact_depth, prev);
    prev = cal.contact_depth;
  }
}

TEST(DeviceTargets, CenteredContactIsReferencePose) {
  const EffectorTarget t[] = {{Effector::A, 0.0, 0.0}, {Effector::B, 0.0, 0.0}};
  const auto q = device_targets(kCal, kCfg, t);
  for (const auto& a : q) {
    EXPECT_NEAR(a.left, 84.0, 0.5);
    EXPECT_NEAR(a.right, 84.0, 0.5);
  }
}

TEST(DeviceTargets, EmptyListHovers) {
  const auto q = device_targets(kCal, kCfg, {});
  for (Effector e : {Effector::A, Effector::B}) {
    const auto p = forward_kinematics(kCfg.linkage(e), q[static_cast<std::size_t>(e)]);
    EXPECT_NEAR(p.x, 0.0, 1e-9);
    EXPECT_NEAR(p.y, -(kCal.contact_depth - kCfg.hover_gap), 1e-9);
    EXPECT_EQ(contact_state(kCal, p), ContactState::Hover);
  }
}

TEST(DeviceTargets, UnreferencedEffectorHoversAtGivenX) {
  const EffectorTarget t[] = {{Effector::A, 2.0, 1.0}};
  const auto q = device_targets(kCal, kCfg, t, {0.0, -3.0});
  const auto b = forward_kinematics(kCfg.linkage_b, q[1]);
  EXPECT_NEAR(b.x, -3.0, 1e-9);
  EXPECT_NEAR(b.y, -19.0, 1e-9);
}

TEST(DeviceTargets, Rejections) {
  const EffectorTarget wide[] = {{Effector::A, kCal.lateral_range + 1.0, 0.0}};
  EXPECT_EQ(kind_of([&] { device_targets(kCal, kCfg, wide); }), ErrorKind::OutOfRange);
  const EffectorTarget deep[] = {{Effector::B, 0.0, 3.0}};
  EXPECT_EQ(kind_of([&] { device_targets(kCal, kCfg, deep); }), ErrorKind::OutOfRange);
  const EffectorTarget twice[] = {{Effector::A, 0.0, 0.0}, {Effector::A, 1.0, 0.0}};
  EXPECT_EQ(kind_of([&] { device_targets(kCal, kCfg, twice); }), ErrorKind::ValidationError);
}

TEST(DeviceTargets, IkFailureNamesTheEffector) {
  DeviceCalibration far = kCal;
  far.contact_depth = 60.0;
  const EffectorTarget t[] = {{Effector::B, 0.0, 0.0}};
  try {
    device_targets(far, kCfg, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Unreachable);
    EXPECT_NE(std::string(e.what()).find("effector A"), std::string::npos);  // A hovers at 57 mm, also out
  }
}

TEST(DeviceTargets, FkReproducesEveryTarget) {
  for (double x = -kCal.lateral_range; x <= kCal.lateral_range; x += 0.5)
    for (double press = -3.0; press <= 2.0; press += 0.25) {
      const EffectorTarget t[] = {{Effector::A, x, press}, {Effector::B, -x, press}};
      const auto q = device_targets(kCal, kCfg, t);
      for (const auto& tg : t) {
        const auto& g = kCfg.linkage(tg.effector);
        const auto& qa = q[static_cast<std::size_t>(tg.effector)];
        const Vec2 want = target_point(kCal, tg.x, tg.press);
        const auto p = forward_kinematics(g, qa, branch_of(g, qa, want));
        EXPECT_LE(norm(p.point() - want), 1e-9);
      }
    }
}

TEST(ContactState, Definitions) {
  EXPECT_EQ(contact_state(kCal, {0.0, -22.0}), ContactState::Contact);
  EXPECT_EQ(contact_state(kCal, {0.0, -20.0}), ContactState::Hover);
  EXPECT_EQ(contact_state(kCal, {0.0, -23.0}), ContactState::Pressing);
}

TEST(ContactState, ThreeIntervalsWithEpsilonBoundaries) {
  const double eps = 0.1;
  EXPECT_EQ(contact_state(kCal, {0.0, -(22.0 + eps - 1e-9)}, eps), ContactState::Contact);
  EXPECT_EQ(contact_state(kCal, {0.0, -(22.0 - eps + 1e-9)}, eps), ContactState::Contact);
  EXPECT_EQ(contact_state(kCal, {0.0, -(22.0 + eps + 1e-9)}, eps), ContactState::Pressing);
  EXPECT_EQ(contact_state(kCal, {0.0, -(22.0 - eps - 1e-9)}, eps), ContactState::Hover);
  ContactState prev = ContactState::Hover;
  for (double d = 15.0; d < 30.0; d += 0.01) {
    const auto s = contact_state(kCal, {0.0, -d}, eps);
    EXPECT_GE(static_cast<int>(s), static_cast<int>(prev));
    prev = s;
  }
}

TEST(DeviceConfigFile, DefaultsRoundTrip) {
  const auto text = device_config_to_json(kCfg).dump(2);
  const auto back = parse_device_config(text);
  EXPECT_EQ(device_config_to_json(back), device_config_to_json(kCfg));
}

TEST(DeviceConfigFile, ShippedFileMatchesDefaults) {
  const auto cfg = load_device_config(LINKRING_DATA_DIR "/config/default.json");
  EXPECT_EQ(device_config_to_json(cfg), device_config_to_json(kCfg));
}

TEST(DeviceConfigFile, PartialFileKeepsDefaults) {
  const auto cfg = parse_device_config(R"({"standoff_mm": 15.0, "transport": {"device": "/dev/ttyUSB0"}})");
  EXPECT_DOUBLE_EQ(cfg.standoff, 15.0);
  EXPECT_EQ(cfg.transport.device, "/dev/ttyUSB0");
  EXPECT_EQ(cfg.transport.baud, 115200);
  EXPECT_DOUBLE_EQ(cfg.spacer, 26.0);
}

TEST(DeviceConfigFile, UnknownKeysRejected) {
  EXPECT_EQ(kind_of([] { parse_device_config(R"({"spacr_mm": 26})"); }), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of([] { parse_device_config(R"({"elbows": {"left": "out", "middle": "in"}})"); }),
            ErrorKind::ValidationError);
}

TEST(DeviceConfigFile, InvalidValuesRejected) {
  EXPECT_EQ(kind_of([] { parse_device_config(R"({"spacer_mm": 0})"); }), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of([] { parse_device_config(R"({"spacer_mm": "wide"})"); }), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of([] { parse_device_config(R"({"servos": []})"); }), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of([] { parse_device_config(R"({"elbows": {"left": "sideways"}})"); }),
            ErrorKind::ValidationError);
}

TEST(DeviceConfigFile, SyntaxErrorReportsPosition) {
  try {
    parse_device_config("{\n  \"spacer_mm\": 26,\n  oops\n}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(DeviceConfig, ServoMapValidation) {
  DeviceConfig cfg;
  cfg.servos[1].channel = 0;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::ValidationError);
  cfg = DeviceConfig{};
  cfg.servos[1].right_side = false;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::ValidationError);
}
