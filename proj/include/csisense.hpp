#pragma once

#include "csisense/error.hpp"
#include "csisense/rng.hpp"
#include "csisense/parallel.hpp"
#include "csisense/binio.hpp"
#include "csisense/csi_data.hpp"
#include "csisense/npy.hpp"
#include "csisense/features.hpp"
#include "csisense/svm.hpp"
#include "csisense/lda.hpp"
#include "csisense/nbsvm.hpp"
#include "csisense/forest.hpp"
#include "csisense/cnn.hpp"
#include "csisense/synthcsi.hpp"
#include "csisense/model.hpp"
#include "csisense/evalproto.hpp"
