#ifndef ICAFUSION_SERIALIZE_HPP
#define ICAFUSION_SERIALIZE_HPP

#include <json.hpp>

#include "icafusion/discriminator.hpp"
#include "icafusion/generator.hpp"
#include "icafusion/trainer.hpp"

// JSON round-trips for the architecture/config structs, shared by the
// config file loader and the checkpoint header.

namespace icafusion {

using nlohmann::json;

inline const char* to_string(GpPoint p) {
    return p == GpPoint::interpolate ? "interpolate" : "real";
}
inline GpPoint gp_point_from_string(const std::string& s) {
    if (s == "interpolate") return GpPoint::interpolate;
    if (s == "real") return GpPoint::real;
    throw ConfigError("unknown gp_point '" + s + "'");
}

inline const char* to_string(GradOp op) {
    return op == GradOp::forward_diff ? "forward_diff" : "sobel";
}
inline GradOp grad_op_from_string(const std::string& s) {
    if (s == "forward_diff") return GradOp::forward_diff;
    if (s == "sobel") return GradOp::sobel;
    throw ConfigError("unknown gradient_op '" + s + "'");
}

inline void to_json(json& j, const GeneratorSpec& s) {
    j = json{{"encoder_widths", s.encoder_widths},
             {"encoder_strides", s.encoder_strides},
             {"decoder_widths", s.decoder_widths},
             {"kernel", s.kernel},
             {"reduction_ratio", s.reduction_ratio},
             {"variant", variant_name(s.variant)},
             {"cross_spatial_operand", s.cross_spatial_operand}};
}

inline void from_json(const json& j, GeneratorSpec& s) {
    j.at("encoder_widths").get_to(s.encoder_widths);
    j.at("encoder_strides").get_to(s.encoder_strides);
    j.at("decoder_widths").get_to(s.decoder_widths);
    j.at("kernel").get_to(s.kernel);
    j.at("reduction_ratio").get_to(s.reduction_ratio);
    s.variant = variant_from_string(j.at("variant").get<std::string>());
    j.at("cross_spatial_operand").get_to(s.cross_spatial_operand);
}

inline void to_json(json& j, const CriticSpec& s) {
    j = json{{"widths", s.widths},     {"kernel", s.kernel},
             {"stride", s.stride},     {"lrelu_slope", s.lrelu_slope},
             {"input_h", s.input_h},   {"input_w", s.input_w}};
}

inline void from_json(const json& j, CriticSpec& s) {
    j.at("widths").get_to(s.widths);
    j.at("kernel").get_to(s.kernel);
    j.at("stride").get_to(s.stride);
    j.at("lrelu_slope").get_to(s.lrelu_slope);
    j.at("input_h").get_to(s.input_h);
    j.at("input_w").get_to(s.input_w);
}

inline void to_json(json& j, const TrainConfig& c) {
    j = json{{"batch_size", c.batch_size},
             {"epochs", c.epochs},
             {"lr_generator", c.lr_generator},
             {"lr_critic", c.lr_critic},
             {"generator_iters", c.generator_iters},
             {"critic_iters", c.critic_iters},
             {"lambda_gp", c.lambda_gp},
             {"seed", c.seed},
             {"checkpoint_period", c.checkpoint_period},
             {"log_period", c.log_period},
             {"device", c.device},
             {"patch_size", c.patch_size},
             {"patch_stride", c.patch_stride},
             {"gp_point", to_string(c.gp_point)},
             {"gradient_op", to_string(c.grad_op)}};
}

inline void from_json(const json& j, TrainConfig& c) {
    j.at("batch_size").get_to(c.batch_size);
    j.at("epochs").get_to(c.epochs);
    j.at("lr_generator").get_to(c.lr_generator);
    j.at("lr_critic").get_to(c.lr_critic);
    j.at("generator_iters").get_to(c.generator_iters);
    j.at("critic_iters").get_to(c.critic_iters);
    j.at("lambda_gp").get_to(c.lambda_gp);
    j.at("seed").get_to(c.seed);
    j.at("checkpoint_period").get_to(c.checkpoint_period);
    j.at("log_period").get_to(c.log_period);
    j.at("device").get_to(c.device);
    j.at("patch_size").get_to(c.patch_size);
    j.at("patch_stride").get_to(c.patch_stride);
    c.gp_point = gp_point_from_string(j.at("gp_point").get<std::string>());
    c.grad_op = grad_op_from_string(j.at("gradient_op").get<std::string>());
}

}  // namespace icafusion

#endif
