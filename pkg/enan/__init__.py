from enan.data_io import Dataset, DatasetFormatException, FoldPlan, load_csv, save_csv, stratified_kfold, \
    export_fold_plan, FeatureScaling, fit_minmax, minmax_normalize, make_gaussian_blobs, make_rings
from enan.spatial_index import SpatialIndex, NeighborList, IndexQueryException, build_index, knn, rth_neighbor, \
    brute_force_knn, euclidean_distances
from enan.natural_neighbor import NaturalNeighborModel, NaturalNeighborException, NaneCapWarning, compute_nane, \
    num_natural_neighbors, nan_edges
from enan.classification import WeightedKnnGraph, ClasswiseStats, EnanModel, FixedEnnModel, ModelStateException, \
    indicator, classwise_statistic, assumed_statistics, class_scores, enn_predict, knn_classify, train_enan, \
    predict_enan, train_enn_fixed, predict_enn_fixed, train_enn_cv, sqrt_k, resolve_k, clamp_k, scale_queries, \
    build_graph
from enan.persistence import save_model, load_model, ModelFormatException
