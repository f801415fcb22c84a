#pragma once

#include "hdrnn/camera.hpp"
#include "hdrnn/error.hpp"
#include "hdrnn/image.hpp"
#include "hdrnn/image_io.hpp"
#include "hdrnn/imgproc.hpp"
#include "hdrnn/merge.hpp"
#include "hdrnn/nn/checkpoint.hpp"
#include "hdrnn/nn/gradcheck.hpp"
#include "hdrnn/nn/layers.hpp"
#include "hdrnn/nn/network.hpp"
#include "hdrnn/nn/random.hpp"
#include "hdrnn/nn/tensor.hpp"
#include "hdrnn/pipeline/dataset.hpp"
#include "hdrnn/pipeline/decompose.hpp"
#include "hdrnn/pipeline/infer.hpp"
#include "hdrnn/pipeline/models.hpp"
#include "hdrnn/pipeline/patches.hpp"
#include "hdrnn/pipeline/train.hpp"
#include "hdrnn/tmo.hpp"
