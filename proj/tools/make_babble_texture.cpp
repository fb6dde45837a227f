// Regenerates data/babble_texture.wav, the stored coffee-shop noise surrogate.
#include <iostream>

#include "speechyolo/corpus.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_babble_texture OUT.wav\n";
    return 2;
  }
  speechyolo::WavData wav{16000, speechyolo::make_babble_texture(16000, 4.0, 2019)};
  speechyolo::write_wav(argv[1], wav, speechyolo::WavEncoding::kFloat32);
  return 0;
}
