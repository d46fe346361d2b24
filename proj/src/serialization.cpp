#include "ralab/serialization.hpp"

namespace ralab {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw InvalidArgument("matrix json: expected an array of rows");
  const auto r = static_cast<Eigen::Index>(j.size());
  const Eigen::Index c = r == 0 ? 0 : static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = j.at(i);
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
      throw ShapeError("matrix json: ragged rows");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = row.at(k).get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

namespace {

void expect_family(const json& j, const char* family) {
  if (!j.contains("family") || j.at("family").get<std::string>() != family)
    throw InvalidArgument(std::string("spec json: expected family '") + family + "'");
}

json layers_to_json(const std::vector<Layer>& layers) {
  json out = json::array();
  for (const Layer& l : layers) out.push_back({{"weight", matrix_to_json(l.weight)}, {"bias", vector_to_json(l.bias)}});
  return out;
}

std::vector<Layer> layers_from_json(const json& j) {
  std::vector<Layer> out;
  for (const json& l : j) out.push_back({matrix_from_json(l.at("weight")), vector_from_json(l.at("bias"))});
  return out;
}

json activation_to_json(const Activation& a) {
  return {{"name", a.name()}, {"slope", a.slope}, {"sharpness", a.sharpness}};
}

Activation activation_from_json(const json& j) {
  return Activation::from_name(j.at("name").get<std::string>(), j.value("slope", 0.5), j.value("sharpness", 1.0));
}

}  // namespace

json to_json(const GaussianSpec& spec) {
  return {{"family", "gaussian"}, {"mean", vector_to_json(spec.mean)}, {"covariance", matrix_to_json(spec.covariance)}};
}

json to_json(const MixtureSpec& spec) {
  return {{"family", "mixture"}, {"weights", vector_to_json(spec.weights)}, {"means", matrix_to_json(spec.means)}};
}

json to_json(const InvertibleGeneratorSpec& spec) {
  const GeneratorConstraints& c = spec.constraints;
  return {{"family", "invertible"},
          {"layers", layers_to_json(spec.layers)},
          {"gamma", vector_to_json(spec.gamma)},
          {"activation", activation_to_json(spec.activation)},
          {"constraints",
           {{"weight_bound", c.weight_bound},
            {"bias_bound", c.bias_bound},
            {"c_sigma", c.c_sigma},
            {"beta_sigma", c.beta_sigma},
            {"min_latent_scale", c.min_latent_scale}}}};
}

json to_json(const InjectiveGeneratorSpec& spec) {
  const InjectiveRegularity& r = spec.regularity;
  return {{"family", "injective"},
          {"layers", layers_to_json(spec.layers)},
          {"activation", activation_to_json(spec.activation)},
          {"activation_on_output", spec.activation_on_output},
          {"regularity", {{"R", r.R}, {"L_G", r.L_G}, {"L_sigma", r.L_sigma}, {"S", r.S}, {"T", r.T}}}};
}

json to_json(const LogDensityNetSpec& spec) {
  json j = {{"family", "logdensity_net"},
            {"layers", layers_to_json(spec.layers)},
            {"C", spec.C},
            {"gamma", vector_to_json(spec.gamma)},
            {"activation", activation_to_json(spec.activation)},
            {"weight_bound", spec.weight_bound},
            {"bias_bound", spec.bias_bound}};
  if (spec.branch.kind == LogSigmaBranch::Kind::Exact) {
    j["branch"] = {{"kind", "exact"}};
  } else {
    j["branch"] = {{"kind", "trainable"},
                   {"in_weight", vector_to_json(spec.branch.in_weight.transpose())},
                   {"in_bias", vector_to_json(spec.branch.in_bias.transpose())},
                   {"out_weight", vector_to_json(spec.branch.out_weight)},
                   {"out_bias", spec.branch.out_bias}};
  }
  return j;
}

GaussianSpec gaussian_from_json(const json& j) {
  expect_family(j, "gaussian");
  GaussianSpec g{vector_from_json(j.at("mean")), matrix_from_json(j.at("covariance"))};
  validate(g);
  return g;
}

MixtureSpec mixture_from_json(const json& j) {
  expect_family(j, "mixture");
  MixtureSpec m{vector_from_json(j.at("weights")), matrix_from_json(j.at("means"))};
  validate(m);
  return m;
}

InvertibleGeneratorSpec invertible_from_json(const json& j) {
  expect_family(j, "invertible");
  InvertibleGeneratorSpec spec;
  spec.layers = layers_from_json(j.at("layers"));
  spec.gamma = vector_from_json(j.at("gamma"));
  spec.activation = activation_from_json(j.at("activation"));
  if (j.contains("constraints")) {
    const json& c = j.at("constraints");
    spec.constraints.weight_bound = c.value("weight_bound", 2.5);
    spec.constraints.bias_bound = c.value("bias_bound", 5.0);
    spec.constraints.c_sigma = c.value("c_sigma", 2.0);
    spec.constraints.beta_sigma = c.value("beta_sigma", 0.5);
    spec.constraints.min_latent_scale = c.value("min_latent_scale", 0.1);
  }
  validate(spec);
  return spec;
}

InjectiveGeneratorSpec injective_from_json(const json& j) {
  expect_family(j, "injective");
  InjectiveGeneratorSpec spec;
  spec.layers = layers_from_json(j.at("layers"));
  spec.activation = activation_from_json(j.at("activation"));
  spec.activation_on_output = j.value("activation_on_output", true);
  if (j.contains("regularity")) {
    const json& r = j.at("regularity");
    spec.regularity = {r.value("R", 0.0), r.value("L_G", 0.0), r.value("L_sigma", 2.0), r.value("S", 0.0),
                       r.value("T", 0.0)};
  }
  validate(spec);
  return spec;
}

LogDensityNetSpec logdensity_net_from_json(const json& j) {
  expect_family(j, "logdensity_net");
  LogDensityNetSpec spec;
  spec.layers = layers_from_json(j.at("layers"));
  spec.C = j.at("C").get<double>();
  spec.gamma = vector_from_json(j.at("gamma"));
  spec.activation = activation_from_json(j.at("activation"));
  spec.weight_bound = j.value("weight_bound", 2.5);
  spec.bias_bound = j.value("bias_bound", 5.0);
  const json& b = j.at("branch");
  if (b.at("kind").get<std::string>() == "trainable") {
    spec.branch.kind = LogSigmaBranch::Kind::Trainable;
    spec.branch.in_weight = vector_from_json(b.at("in_weight")).transpose();
    spec.branch.in_bias = vector_from_json(b.at("in_bias")).transpose();
    spec.branch.out_weight = vector_from_json(b.at("out_weight"));
    spec.branch.out_bias = b.at("out_bias").get<double>();
  }
  return spec;
}

std::string serialize(const InvertibleGeneratorSpec& spec) { return to_json(spec).dump(2); }

InvertibleGeneratorSpec deserialize_invertible(const std::string& text) {
  return invertible_from_json(json::parse(text));
}

}  // namespace ralab
