/*
 * Copyright (c) 2026 The trans2seg Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "trans2seg/model.hpp"

#include "trans2seg/macs.hpp"
#include "trans2seg/ops.hpp"

namespace t2s {

template <typename T>
SegModel<T>::SegModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  backbone_ = std::make_unique<Backbone<T>>(cfg_.backbone, params_, rng);
  if (cfg_.variant != Variant::no_enc_dec) {
    encoder_ = std::make_unique<TransformerEncoder<T>>(cfg_, params_, rng);
  }
  if (cfg_.variant == Variant::full) {
    decoder_ = std::make_unique<PrototypeDecoder<T>>(cfg_, params_, rng);
    head_ = std::make_unique<ConvHead<T>>(cfg_.literal_decoder ? 1 : cfg_.heads,
                                          cfg_.backbone.res2_channels(), cfg_.head, params_, rng);
  } else {
    cnn_decoder_ = std::make_unique<CnnDecoder<T>>(cfg_.embed_dim, cfg_.num_classes, cfg_.head,
                                                   params_, rng);
  }
}

template <typename T>
typename SegModel<T>::Trace SegModel<T>::trace(const Tensor<T>& image) const {
  const std::size_t s = cfg_.input_size;
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != s || image.dim(2) != s) {
    throw DimensionError("model expects an image [3," + std::to_string(s) + "," +
                         std::to_string(s) + "], got " + shape_str(image.shape()) +
                         "; resize inputs to the configured input_size");
  }
  Trace t;
  {
    MacLabel label("backbone");
    auto feats = backbone_->forward(image);
    t.feature = feats.feature;
    t.res2 = feats.res2;
  }
  const std::size_t h = t.feature.dim(1), w = t.feature.dim(2);
  if (encoder_) {
    MacLabel label("encoder");
    t.encoded = encoder_->forward(t.feature);
  }
  if (decoder_) {
    {
      MacLabel label("decoder");
      t.attn = decoder_->forward(t.encoded);
    }
    MacLabel label("head");
    t.logits = head_->forward(t.attn, t.res2, h, w);
  } else {
    MacLabel label("cnn_decoder");
    Tensor<T> map = encoder_ ? reshape(transpose(t.encoded), {cfg_.embed_dim, h, w}) : t.feature;
    t.logits = cnn_decoder_->forward(map, t.res2.dim(1), t.res2.dim(2));
  }
  return t;
}

template <typename T>
MaskImage SegModel<T>::predict(const Tensor<T>& image) const {
  return predict_mask(forward(image), image.dim(1), image.dim(2));
}

template <typename T>
std::map<std::string, std::size_t> SegModel<T>::param_count_by_module() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [name, t] : params_.entries()) out[name.substr(0, name.find('.'))] += t.numel();
  return out;
}

template <typename T>
std::map<std::string, std::uint64_t> count_macs(const SegModel<T>& model) {
  const std::size_t s = model.config().input_size;
  MacCounter counter;
  model.forward(Tensor<T>({3, s, s}, T(0)));
  return counter.by_module();
}

template class SegModel<float>;
template class SegModel<double>;
template std::map<std::string, std::uint64_t> count_macs(const SegModel<float>&);
template std::map<std::string, std::uint64_t> count_macs(const SegModel<double>&);

}  // namespace t2s
