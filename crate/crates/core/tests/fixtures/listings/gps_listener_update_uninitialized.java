private GnssStatus.Callback callback;
public void addGpsStatusListener(GpsStatus.Listener listener) {
    mGpsStatusListener = listener;
    if (android.os.Build.VERSION.SDK_INT >= 
                        android.os.Build.VERSION_CODES.N) {
        locationManager.registerGnssStatusCallback(callback);
    }
    else{
        locationManager.addGpsStatusListener(mGpsStatusListener);
    }
}
